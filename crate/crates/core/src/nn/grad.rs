use super::layer::{DenseLayer, GradientSet, LayerGrad};
use super::tensor::Tensor;
use crate::error::{Error, Result};

impl GradientSet {
    pub fn zeros_like(layers: &[DenseLayer], start: usize) -> Self {
        let layers = layers
            .iter()
            .map(|l| LayerGrad {
                weights: Tensor::zeros(l.weights.shape().to_vec()),
                bias: Tensor::zeros(l.bias.shape().to_vec()),
            })
            .collect();
        Self { start, layers }
    }

    /// One past the last covered layer index.
    pub fn end(&self) -> usize {
        self.start + self.layers.len()
    }

    pub fn with_start(mut self, start: usize) -> Self {
        self.start = start;
        self
    }

    pub fn global_norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|g| g.weights.sum_squares() + g.bias.sum_squares())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.layers {
            g.weights.scale_in_place(factor);
            g.bias.scale_in_place(factor);
        }
    }

    pub fn is_aligned_with(&self, other: &GradientSet) -> bool {
        self.start == other.start
            && self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.weights.shape() == b.weights.shape() && a.bias.shape() == b.bias.shape()
            })
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &GradientSet) -> Result<()> {
        if !self.is_aligned_with(other) {
            return Err(Error::Shape(format!(
                "gradient ranges [{}, {}) and [{}, {}) do not align",
                self.start,
                self.end(),
                other.start,
                other.end()
            )));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.axpy(alpha, &b.weights)?;
            a.bias.axpy(alpha, &b.bias)?;
        }
        Ok(())
    }

    pub fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|g| g.weights.data().iter().chain(g.bias.data()))
            .copied()
    }
}

/// Rescales `grads` so its global l2 norm does not exceed `tau`.
pub fn clip_l2(grads: &GradientSet, tau: f64) -> GradientSet {
    let norm = grads.global_norm();
    let mut out = grads.clone();
    if norm > tau {
        out.scale(tau / norm);
    }
    out
}

/// Plain SGD: `p -= eta * g` for every parameter covered by `grads`.
pub fn sgd_step(layers: &mut [DenseLayer], grads: &GradientSet, eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Input(format!("learning rate must be positive, got {eta}")));
    }
    if layers.len() != grads.layers.len() {
        return Err(Error::Shape(format!(
            "{} gradient layers for {} parameter layers",
            grads.layers.len(),
            layers.len()
        )));
    }
    for (idx, (layer, g)) in layers.iter_mut().zip(&grads.layers).enumerate() {
        if layer.weights.shape() != g.weights.shape() || layer.bias.shape() != g.bias.shape() {
            return Err(Error::layer(grads.start + idx, "gradient shape differs from parameter shape"));
        }
    }
    for (layer, g) in layers.iter_mut().zip(&grads.layers) {
        layer.weights.axpy(-eta, &g.weights)?;
        layer.bias.axpy(-eta, &g.bias)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;

    fn single(w: f64, b: f64) -> GradientSet {
        GradientSet {
            start: 0,
            layers: vec![LayerGrad {
                weights: Tensor::scalar_matrix(w),
                bias: Tensor::new(vec![1], vec![b]).unwrap(),
            }],
        }
    }

    fn scalar_layer(w: f64) -> DenseLayer {
        DenseLayer::new(Tensor::scalar_matrix(w), Tensor::zeros(vec![1]), Activation::Identity).unwrap()
    }

    #[test]
    fn clip_scales_to_tau() {
        // norm sqrt(1.2^2 + 1.6^2) = 2
        let g = single(1.2, 1.6);
        let c = clip_l2(&g, 0.5);
        assert!((c.global_norm() - 0.5).abs() < 1e-15);
        let got: Vec<f64> = c.entries().collect();
        assert!((got[0] - 0.3).abs() < 1e-15 && (got[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn clip_below_threshold_is_untouched() {
        let g = single(0.18, 0.24);
        assert_eq!(clip_l2(&g, 0.5), g);
    }

    #[test]
    fn clip_zero() {
        let g = single(0.0, 0.0);
        assert_eq!(clip_l2(&g, 0.5), g);
    }

    #[test]
    fn sgd_definition() {
        let mut layers = vec![scalar_layer(1.0)];
        sgd_step(&mut layers, &single(0.5, 0.0), 0.1).unwrap();
        assert!((layers[0].weights.data()[0] - 0.95).abs() < 1e-15);
        sgd_step(&mut layers, &single(0.0, 0.0), 0.1).unwrap();
        assert!((layers[0].weights.data()[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn two_steps_equal_one_summed_step() {
        let (g1, g2) = (single(0.25, -0.5), single(0.5, 0.125));
        let mut a = vec![scalar_layer(1.0)];
        sgd_step(&mut a, &g1, 0.5).unwrap();
        sgd_step(&mut a, &g2, 0.5).unwrap();
        let mut sum = g1.clone();
        sum.axpy(1.0, &g2).unwrap();
        let mut b = vec![scalar_layer(1.0)];
        sgd_step(&mut b, &sum, 0.5).unwrap();
        // dyadic values keep this exact
        assert_eq!(a, b);
    }

    #[test]
    fn sgd_shape_mismatch() {
        let mut layers = vec![scalar_layer(1.0), scalar_layer(1.0)];
        assert!(sgd_step(&mut layers, &single(1.0, 1.0), 0.1).is_err());
        assert!(sgd_step(&mut layers[..1], &single(1.0, 1.0), 0.0).is_err());
    }
}
