use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Fully connected layer `y = act(x W^T + b)` with `W: [out, in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        if weights.shape().len() != 2 {
            return Err(Error::Shape(format!("weights must be 2-D, got {:?}", weights.shape())));
        }
        if bias.shape() != [weights.shape()[0]] {
            return Err(Error::Shape(format!(
                "bias {:?} does not match weights {:?}",
                bias.shape(),
                weights.shape()
            )));
        }
        Ok(Self { weights, bias, activation })
    }

    /// Glorot-uniform weights in `[-a, a]`, `a = sqrt(6 / (in + out))`, zero bias.
    pub fn init<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Shape(format!("layer dims must be positive, got {in_dim}->{out_dim}")));
        }
        let a = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let w = (0..in_dim * out_dim).map(|_| rng.random_range(-a..=a)).collect();
        Ok(Self {
            weights: Tensor::new(vec![out_dim, in_dim], w)?,
            bias: Tensor::zeros(vec![out_dim]),
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Multiply-adds for one forward pass over `batch` rows, counted as 2 flops each.
    pub fn forward_flops(&self, batch: usize) -> u64 {
        2 * (batch * self.in_dim() * self.out_dim()) as u64
    }

    pub fn same_shape(&self, other: &DenseLayer) -> bool {
        self.weights.shape() == other.weights.shape()
            && self.bias.shape() == other.bias.shape()
            && self.activation == other.activation
    }

    /// Flat view of all parameters: weights followed by bias.
    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights.data().iter().chain(self.bias.data()).copied()
    }
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Tensor,
    pre: Tensor,
    shape: (usize, usize),
}

/// Everything [`backward`] needs from a [`forward`] call.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layers: Vec<LayerCache>,
}

impl ForwardCache {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Input that was fed to cached layer `i`.
    pub fn input_of(&self, i: usize) -> &Tensor {
        &self.layers[i].input
    }
}

pub fn forward(layers: &[DenseLayer], input: &Tensor) -> Result<(Tensor, ForwardCache)> {
    if layers.is_empty() {
        return Err(Error::Input("forward through an empty layer list".into()));
    }
    if input.shape().len() != 2 {
        return Err(Error::Shape(format!("input must be [batch, features], got {:?}", input.shape())));
    }
    let mut caches = Vec::with_capacity(layers.len());
    let mut x = input.clone();
    for (idx, layer) in layers.iter().enumerate() {
        if x.cols() != layer.in_dim() {
            return Err(Error::layer(
                idx,
                format!("expects {} input features, got {}", layer.in_dim(), x.cols()),
            ));
        }
        let pre = affine(layer, &x);
        let mut post = pre.clone();
        post.data_mut().iter_mut().for_each(|v| *v = layer.activation.apply(*v));
        caches.push(LayerCache { input: x, pre, shape: (layer.out_dim(), layer.in_dim()) });
        x = post;
    }
    Ok((x, ForwardCache { layers: caches }))
}

fn affine(layer: &DenseLayer, x: &Tensor) -> Tensor {
    let (b, n_in, n_out) = (x.rows(), layer.in_dim(), layer.out_dim());
    let w = layer.weights.data();
    let bias = layer.bias.data();
    let mut out = vec![0.0; b * n_out];
    for r in 0..b {
        let xr = x.row(r);
        let orow = &mut out[r * n_out..(r + 1) * n_out];
        for (o, dst) in orow.iter_mut().enumerate() {
            let wr = &w[o * n_in..(o + 1) * n_in];
            let mut acc = 0.0;
            for (a, c) in xr.iter().zip(wr) {
                acc += a * c;
            }
            *dst = acc + bias[o];
        }
    }
    Tensor::new(vec![b, n_out], out).expect("affine output shape")
}

/// Per-layer parameter gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Gradients for a contiguous run of layers starting at global index `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub start: usize,
    pub layers: Vec<LayerGrad>,
}

/// Back-propagates `d_output` through `layers` using the cache from the
/// matching [`forward`] call. Returns the parameter gradients (indexed from
/// `start = 0`) and the gradient with respect to the block input.
pub fn backward(
    layers: &[DenseLayer],
    cache: &ForwardCache,
    d_output: &Tensor,
) -> Result<(GradientSet, Tensor)> {
    if cache.layers.len() != layers.len() {
        return Err(Error::Input(format!(
            "cache holds {} layers, network has {}",
            cache.layers.len(),
            layers.len()
        )));
    }
    for (idx, (layer, c)) in layers.iter().zip(&cache.layers).enumerate() {
        if c.shape != (layer.out_dim(), layer.in_dim()) {
            return Err(Error::layer(idx, "cache was produced by a different network"));
        }
    }
    let last = cache.layers.last().expect("non-empty cache");
    if d_output.shape() != last.pre.shape() {
        return Err(Error::Shape(format!(
            "upstream gradient {:?} does not match output {:?}",
            d_output.shape(),
            last.pre.shape()
        )));
    }

    let mut grads = Vec::with_capacity(layers.len());
    let mut upstream = d_output.clone();
    for (layer, c) in layers.iter().zip(&cache.layers).rev() {
        let (n_out, n_in) = c.shape;
        let b = c.input.rows();
        // delta = upstream * act'(pre)
        let mut delta = upstream;
        for (d, p) in delta.data_mut().iter_mut().zip(c.pre.data()) {
            *d *= layer.activation.derivative(*p);
        }
        let mut dw = vec![0.0; n_out * n_in];
        let mut db = vec![0.0; n_out];
        let mut dx = vec![0.0; b * n_in];
        let w = layer.weights.data();
        for r in 0..b {
            let xr = c.input.row(r);
            let dr = delta.row(r);
            let dxr = &mut dx[r * n_in..(r + 1) * n_in];
            for o in 0..n_out {
                let g = dr[o];
                if g == 0.0 {
                    continue;
                }
                db[o] += g;
                let dwr = &mut dw[o * n_in..(o + 1) * n_in];
                let wr = &w[o * n_in..(o + 1) * n_in];
                for i in 0..n_in {
                    dwr[i] += g * xr[i];
                    dxr[i] += g * wr[i];
                }
            }
        }
        grads.push(LayerGrad {
            weights: Tensor::new(vec![n_out, n_in], dw)?,
            bias: Tensor::new(vec![n_out], db)?,
        });
        upstream = Tensor::new(vec![b, n_in], dx)?;
    }
    grads.reverse();
    Ok((GradientSet { start: 0, layers: grads }, upstream))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eye2(act: Activation) -> DenseLayer {
        DenseLayer::new(
            Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
            Tensor::zeros(vec![2]),
            act,
        )
        .unwrap()
    }

    #[test]
    fn identity_layer_passes_input() {
        let x = Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let (y, _) = forward(&[eye2(Activation::Identity)], &x).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0]);
    }

    #[test]
    fn relu_layer_clamps_negatives() {
        let x = Tensor::from_rows(&[vec![-1.0, 3.0]]).unwrap();
        let (y, _) = forward(&[eye2(Activation::Relu)], &x).unwrap();
        assert_eq!(y.data(), &[0.0, 3.0]);
    }

    #[test]
    fn dimension_mismatch_names_layer() {
        let mut rng = rand::rng();
        let layers = vec![
            DenseLayer::init(3, 4, Activation::Relu, &mut rng).unwrap(),
            DenseLayer::init(5, 2, Activation::Identity, &mut rng).unwrap(),
        ];
        let x = Tensor::zeros(vec![1, 3]);
        match forward(&layers, &x) {
            Err(Error::Layer { layer, .. }) => assert_eq!(layer, 1),
            other => panic!("expected layer error, got {other:?}"),
        }
    }

    #[test]
    fn scalar_chain_rule() {
        let layer = DenseLayer::new(
            Tensor::scalar_matrix(2.0),
            Tensor::zeros(vec![1]),
            Activation::Identity,
        )
        .unwrap();
        let x = Tensor::scalar_matrix(3.0);
        let (_, cache) = forward(std::slice::from_ref(&layer), &x).unwrap();
        let (g, dx) = backward(&[layer], &cache, &Tensor::scalar_matrix(1.0)).unwrap();
        assert_eq!(g.layers[0].weights.data(), &[3.0]);
        assert_eq!(g.layers[0].bias.data(), &[1.0]);
        assert_eq!(dx.data(), &[2.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = rand::rng();
        let layers = vec![
            DenseLayer::init(3, 4, Activation::Relu, &mut rng).unwrap(),
            DenseLayer::init(4, 2, Activation::Identity, &mut rng).unwrap(),
        ];
        let x = Tensor::new(vec![2, 3], vec![0.5, -1.0, 2.0, 1.0, 0.1, -0.3]).unwrap();
        let (_, cache) = forward(&layers, &x).unwrap();
        let (g, dx) = backward(&layers, &cache, &Tensor::zeros(vec![2, 2])).unwrap();
        assert!(g.layers.iter().all(|l| l.weights.data().iter().chain(l.bias.data()).all(|v| *v == 0.0)));
        assert!(dx.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut rng = rand::rng();
        let a = vec![DenseLayer::init(3, 4, Activation::Relu, &mut rng).unwrap()];
        let b = vec![DenseLayer::init(3, 5, Activation::Relu, &mut rng).unwrap()];
        let (_, cache) = forward(&a, &Tensor::zeros(vec![1, 3])).unwrap();
        assert!(backward(&b, &cache, &Tensor::zeros(vec![1, 5])).is_err());
        assert!(backward(&a, &cache, &Tensor::zeros(vec![1, 5])).is_err());
    }
}
