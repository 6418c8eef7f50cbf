//! Dense tensors, reverse-mode differentiation, ADAM, and checkpoints.

mod adam;
pub mod checkpoint;
mod kernels;
mod params;
mod tape;
#[allow(clippy::module_inception)]
mod tensor;

pub use adam::AdamState;
pub use params::{ParamId, ParamStore};
pub use tape::{BatchStats, Gradients, Tape, Var};
pub use tensor::Tensor;

/// Normalization epsilon shared by layer and batch norm.
pub const NORM_EPS: f64 = 1e-5;
/// Running-statistics momentum for batch norm.
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, thiserror::Error)]
pub enum TensorError {
    #[error("dimension error: {0}")]
    Shape(String),
    #[error("index {index} out of range for {len} rows")]
    Index { index: usize, len: usize },
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("parameter error: {0}")]
    Param(String),
    #[error("format error at byte {offset}: {msg}")]
    Format { offset: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
