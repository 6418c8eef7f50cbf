//! Dataset cases, feature files and the synthetic corpus generator.

mod dataset;
mod features;
mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{read_dataset, write_dataset, DatasetCase};
pub use features::{
    frames_to_features, read_feature_file, resample_sequence, synthesize_features, write_feature_file, VisualFeatures,
    FRAMES_PER_FEATURE, RESAMPLED_LEN,
};
pub use synth::{synthesize_corpus, Grammar, SynthCase, SynthCorpus, SynthOptions};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("input error: {0}")]
    Input(String),
    #[error("feature format error at byte {offset}: {msg}")]
    Format { offset: usize, msg: String },
    #[error("dataset line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("grammar error: {0}")]
    Grammar(String),
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}
