//! Corpus preparation, the training loop, evaluation and run directories.

mod config;
mod evaluate;
mod prepare;
mod run;
mod trainer;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::data::DataError;
use crate::extract::ExtractError;
use crate::losses::LossError;
use crate::metrics::MetricError;
use crate::model::ModelError;
use crate::tensor::TensorError;
use crate::vocab::VocabError;

pub use config::{RocScoring, RunConfig};
pub use evaluate::{evaluate, slot_triples, triple_scores, CaseEvaluation, Evaluation, TaggedTriple, TripleTag};
pub use prepare::{prepare, Corpus, Prepared, PreparedCase};
pub use run::{load_checkpoint, save_checkpoint, write_evaluation, Manifest, RunDir, CHECKPOINT, MANIFEST, STATE};
pub use trainer::{batch_objective, restoration_table, BatchObjective, Best, EpochLoss, Trainer};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("config error: {0}")]
    Config(String),
    #[error("non-finite loss at epoch {epoch}, step {step}: {msg}")]
    NonFinite { epoch: usize, step: usize, msg: String },
    #[error("vocabulary mismatch: checkpoint was trained with vocabulary {expected}, found {found}")]
    VocabMismatch { expected: String, found: String },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A sub-seed for one named purpose, stable across runs and resumption.
pub fn derive_seed(seed: u64, purpose: &str, parts: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(purpose.as_bytes());
    for p in parts {
        h.update(p.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
