//! The shared global model and the contiguous prefixes cut from it.

mod checkpoint;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_VERSION};


use crate::error::{Error, Result};
use crate::nn::{Activation, DenseLayer};
use crate::rng::{stream_rng, Stream};

/// Global encoder `theta_1..theta_L` plus the server classifier, stored as one
/// layer list with the classifier last.
///
/// Encoder layers are 0-indexed in code; a client of depth `d` owns
/// `layers[..d]` and the server continues with `layers[d..]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperNet {
    layers: Vec<DenseLayer>,
}

/// A client's lightweight local classifier on top of its smashed data.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientHead {
    pub layer: DenseLayer,
}

impl SuperNet {
    /// `layer_dims = [input, h_1, ..., h_L]`; every encoder layer is ReLU and
    /// the classifier maps `h_L` to `num_classes` logits.
    pub fn build(layer_dims: &[usize], num_classes: usize, seed: u64) -> Result<Self> {
        if layer_dims.len() < 3 {
            return Err(Error::Input(format!(
                "need an input width and at least two encoder widths, got {layer_dims:?}"
            )));
        }
        if num_classes < 2 {
            return Err(Error::Input(format!("need at least two classes, got {num_classes}")));
        }
        let mut rng = stream_rng(seed, Stream::Model, 0);
        let encoder = layer_dims
            .windows(2)
            .map(|w| DenseLayer::init(w[0], w[1], Activation::Relu, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let classifier =
            DenseLayer::init(*layer_dims.last().unwrap(), num_classes, Activation::Identity, &mut rng)?;
        Self::from_parts(encoder, classifier)
    }

    pub fn from_parts(encoder: Vec<DenseLayer>, classifier: DenseLayer) -> Result<Self> {
        if encoder.len() < 2 {
            return Err(Error::Input(format!("encoder needs at least 2 layers, got {}", encoder.len())));
        }
        for (i, pair) in encoder.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::layer(
                    i + 1,
                    format!("input width {} does not chain with {}", pair[1].in_dim(), pair[0].out_dim()),
                ));
            }
        }
        if classifier.in_dim() != encoder.last().unwrap().out_dim() {
            return Err(Error::layer(encoder.len(), "classifier does not chain with the last encoder layer"));
        }
        if classifier.activation != Activation::Identity {
            return Err(Error::layer(encoder.len(), "classifier must emit raw logits"));
        }
        let mut layers = encoder;
        layers.push(classifier);
        Ok(Self { layers })
    }

    /// Number of encoder layers `L`.
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.classifier().out_dim()
    }

    pub fn encoder(&self) -> &[DenseLayer] {
        &self.layers[..self.depth()]
    }

    pub fn encoder_mut(&mut self) -> &mut [DenseLayer] {
        let l = self.depth();
        &mut self.layers[..l]
    }

    pub fn classifier(&self) -> &DenseLayer {
        &self.layers[self.depth()]
    }

    /// Width of the smashed data a client of depth `d` emits.
    pub fn smashed_dim(&self, d: usize) -> Result<usize> {
        self.check_depth(d)?;
        Ok(self.layers[d - 1].out_dim())
    }

    pub fn check_depth(&self, d: usize) -> Result<()> {
        if d == 0 || d >= self.depth() {
            return Err(Error::Input(format!(
                "split depth {d} outside [1, {}]",
                self.depth() - 1
            )));
        }
        Ok(())
    }

    /// Deep copy of encoder layers `1..=d`.
    pub fn slice_prefix(&self, d: usize) -> Result<Vec<DenseLayer>> {
        self.check_depth(d)?;
        Ok(self.layers[..d].to_vec())
    }

    /// Server-side layers `d+1..=L` followed by the classifier.
    pub fn server_path(&self, d: usize) -> Result<&[DenseLayer]> {
        self.check_depth(d)?;
        Ok(&self.layers[d..])
    }

    pub fn server_path_mut(&mut self, d: usize) -> Result<&mut [DenseLayer]> {
        self.check_depth(d)?;
        Ok(&mut self.layers[d..])
    }

    /// Every encoder layer plus the classifier.
    pub fn full_path(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn make_client_head(&self, d: usize, num_classes: usize, seed: u64) -> Result<ClientHead> {
        let in_dim = self.smashed_dim(d)?;
        let mut rng = stream_rng(seed, Stream::Heads, d as u64);
        Ok(ClientHead { layer: DenseLayer::init(in_dim, num_classes, Activation::Identity, &mut rng)? })
    }

    /// True iff `prefix` has exactly `d` layers shaped like global layers `1..=d`.
    pub fn check_alignment(&self, prefix: &[DenseLayer], d: usize) -> bool {
        d >= 1
            && d < self.depth()
            && prefix.len() == d
            && prefix.iter().zip(&self.layers).all(|(p, g)| p.same_shape(g))
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    /// FNV-1a over the bit patterns of every parameter; cheap change detection.
    pub fn checksum(&self) -> u64 {
        params_checksum(&self.layers)
    }
}

pub fn params_checksum<'a>(layers: impl IntoIterator<Item = &'a DenseLayer>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for layer in layers {
        for v in layer.params() {
            for byte in v.to_bits().to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{forward, Tensor};

    #[test]
    fn build_example() {
        let net = SuperNet::build(&[8, 16, 16, 8], 4, 7).unwrap();
        assert_eq!(net.depth(), 3);
        assert_eq!(net.classifier().in_dim(), 8);
        assert_eq!(net.classifier().out_dim(), 4);
        assert_eq!(net, SuperNet::build(&[8, 16, 16, 8], 4, 7).unwrap());
        assert_ne!(net, SuperNet::build(&[8, 16, 16, 8], 4, 8).unwrap());
    }

    #[test]
    fn build_rejects_single_layer() {
        assert!(SuperNet::build(&[8, 16], 4, 7).is_err());
    }

    #[test]
    fn prefixes() {
        let net = SuperNet::build(&[8, 16, 16, 8], 4, 7).unwrap();
        assert_eq!(net.slice_prefix(1).unwrap(), net.encoder()[..1].to_vec());
        assert_eq!(net.slice_prefix(2).unwrap(), net.encoder()[..2].to_vec());
        assert!(net.slice_prefix(3).is_err());
        assert!(net.slice_prefix(0).is_err());
    }

    #[test]
    fn heads() {
        let net = SuperNet::build(&[8, 12, 16, 8], 4, 7).unwrap();
        let h = net.make_client_head(2, 4, 11).unwrap();
        assert_eq!((h.layer.in_dim(), h.layer.out_dim()), (16, 4));
        assert_eq!(h, net.make_client_head(2, 4, 11).unwrap());
        assert!(net.make_client_head(3, 4, 11).is_err());
    }

    #[test]
    fn alignment() {
        let net = SuperNet::build(&[8, 12, 16, 8], 4, 7).unwrap();
        let prefix = net.slice_prefix(2).unwrap();
        assert!(net.check_alignment(&prefix, 2));

        let mut transposed = prefix.clone();
        let w = &transposed[1].weights;
        let t = Tensor::new(vec![w.shape()[1], w.shape()[0]], w.data().to_vec()).unwrap();
        transposed[1].weights = t;
        assert!(!net.check_alignment(&transposed, 2));

        assert!(!net.check_alignment(&prefix[..1], 2));
    }

    #[test]
    fn server_continues_every_prefix() {
        let net = SuperNet::build(&[5, 7, 6, 9, 4], 3, 1).unwrap();
        let x = Tensor::zeros(vec![2, 5]);
        for d in 1..net.depth() {
            let (z, _) = forward(&net.slice_prefix(d).unwrap(), &x).unwrap();
            assert_eq!(z.cols(), net.encoder()[d].in_dim());
            let (logits, _) = forward(net.server_path(d).unwrap(), &z).unwrap();
            assert_eq!(logits.shape(), &[2, 3]);
        }
    }
}
