//! Report-quality metrics and the micro-averaged ROC for restored sub-graphs.
//! Inputs are lowercased word tokens.

mod bleu;
mod cider;
mod meteor;
mod roc;
mod rouge;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bleu::{bleu, clipped_precision};
pub use cider::cider;
pub use meteor::meteor_simplified;
pub use roc::{auc, auc_rank, roc_micro, write_roc_csv, RocPoint};
pub use rouge::{lcs_len, rouge_l, rouge_l_corpus};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("AUC is undefined: {0}")]
    Undefined(String),
    #[error("{0}")]
    Input(String),
}

/// All n-grams of order `n`, with counts.
pub fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> BTreeMap<Vec<&str>, usize> {
    let mut out = BTreeMap::new();
    if n == 0 || tokens.len() < n {
        return out;
    }
    for w in tokens.windows(n) {
        *out.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
    }
    out
}

/// The seven corpus scores reported for generated reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlgScores {
    pub bleu_1: f64,
    pub bleu_2: f64,
    pub bleu_3: f64,
    pub bleu_4: f64,
    pub meteor: f64,
    pub rouge_l: f64,
    pub cider: f64,
}

impl NlgScores {
    pub fn compute(candidates: &[Vec<String>], references: &[Vec<String>]) -> Self {
        let meteor = if candidates.is_empty() {
            0.0
        } else {
            candidates.iter().zip(references).map(|(c, r)| meteor_simplified(c, r)).sum::<f64>()
                / candidates.len() as f64
        };
        Self {
            bleu_1: bleu(candidates, references, 1),
            bleu_2: bleu(candidates, references, 2),
            bleu_3: bleu(candidates, references, 3),
            bleu_4: bleu(candidates, references, 4),
            meteor,
            rouge_l: rouge_l_corpus(candidates, references),
            cider: cider(candidates, references),
        }
    }
}
