//! Minimal dense-network engine: forward pass, backpropagation, Glorot
//! initialization and Adam. All arithmetic is `f64`.

mod activation;
mod adam;
mod network;

pub use activation::{sigmoid, Activation, LEAKY_SLOPE};
pub use adam::{AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON};
pub use network::{glorot_bound, DenseParams, ForwardCache, Gradients, Layer, LayerSpec, Network};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("network has no layers")]
    Empty,
    #[error("layer {layer}: dimensions must be at least 1")]
    ZeroDim { layer: usize },
    #[error("layer {layer}: input dim {found} does not chain from previous output dim {expected}")]
    DimensionChain { layer: usize, expected: usize, found: usize },
    #[error("layer {layer}: parameter shapes do not match the layer spec")]
    ParamShape { layer: usize },
    #[error("{context}: expected shape {expected:?}, found {found:?}")]
    Shape { context: &'static str, expected: (usize, usize), found: (usize, usize) },
    #[error("forward cache does not belong to the current network parameters")]
    StaleCache,
    #[error("gradient shapes do not match the network")]
    GradientShape,
    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },
    #[error("expected at least {expected} parameter values, found {found}")]
    ValueCount { expected: usize, found: usize },
}
