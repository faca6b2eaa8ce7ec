//! Dense layers, softmax cross-entropy, exact backprop, clipping and SGD.

mod grad;
mod layer;
mod loss;
pub mod oracle;
mod tensor;

pub use grad::{clip_l2, sgd_step};
pub use layer::{backward, forward, Activation, DenseLayer, ForwardCache, GradientSet, LayerGrad};
pub use loss::{accuracy, softmax_cross_entropy};
pub use oracle::finite_diff_oracle;
pub use tensor::Tensor;

/// Default clip threshold for the local encoder gradient.
pub const DEFAULT_CLIP_TAU: f64 = 0.5;
