//! Cross-modal clinical graph transformer for ophthalmic report generation:
//! a small autodiff engine, a rule-based triple extractor, the model, its
//! losses, evaluation metrics, and the training harness.

pub mod data;
pub mod extract;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod tensor;
pub mod train;
pub mod vocab;

pub use data::Split;
pub use extract::{ClinicalGraph, Extractor, Triple};
pub use model::{CgtModel, ModelConfig};
pub use tensor::{AdamState, ParamStore, Tape, Tensor, TensorError, Var};
pub use vocab::Vocabulary;
