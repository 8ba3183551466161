//! Dense feedforward network engine.
//!
//! Hidden layers use the exact (erf-based) GELU, the output layer produces
//! logits that are normalised by a softmax. Gradients are computed by
//! hand-written backpropagation for both parameters and inputs.

mod adam;
mod gelu;
mod network;
mod train;

pub use adam::{adam_step, AdamState};
pub use gelu::{gelu, gelu_derivative, standard_normal_cdf};
pub use network::{
    softmax, DenseLayer, DenseNetwork, FeatureVector, GradientTarget, Gradients, InputGradient,
    LayerGradients, NetworkDocument, NetworkSpec, NETWORK_FORMAT, NETWORK_FORMAT_VERSION,
};
pub use train::{train, EpochLoss, LabeledSlice, TrainConfig, TrainOutcome};
