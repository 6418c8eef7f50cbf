//! Training objective: report cross-entropy plus the margin-based triple
//! restoration loss.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::{ClinicalGraph, TokenId, Triple};
use crate::tensor::{Tape, Tensor, TensorError, Var};
use crate::vocab::PAD;

/// Rejection-sampling attempts before falling back to an exhaustive scan.
const MAX_REJECTIONS: usize = 64;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("non-finite {0} loss")]
    NonFinite(&'static str),
    #[error("invalid loss weights: {0}")]
    Weights(String),
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_ce: f64,
    pub lambda_tr: f64,
    pub gamma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda_ce: 1.0, lambda_tr: 1.0, gamma: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), LossError> {
        if self.gamma.is_nan() || self.gamma <= 0.0 {
            return Err(LossError::Weights(format!("margin gamma must be positive, got {}", self.gamma)));
        }
        if !(self.lambda_ce >= 0.0 && self.lambda_tr >= 0.0) {
            return Err(LossError::Weights("lambda weights must be non-negative".into()));
        }
        Ok(())
    }
}

/// `‖e_s + r − e_o‖₁`
pub fn transe_energy(e_s: &[f64], r: &[f64], e_o: &[f64]) -> f64 {
    assert!(e_s.len() == r.len() && r.len() == e_o.len(), "embedding dimensions differ");
    e_s.iter().zip(r).zip(e_o).map(|((s, r), o)| (s + r - o).abs()).sum()
}

/// One hinge term: `max(d_pos − d_neg + γ, 0)`.
pub fn hinge(d_pos: f64, d_neg: f64, gamma: f64) -> f64 {
    (d_pos - d_neg + gamma).max(0.0)
}

/// Draws corrupted triples that are absent from the graph.
pub struct NegativeSampler<'g> {
    graph: &'g ClinicalGraph,
    entities: Vec<TokenId>,
    rng: ChaCha8Rng,
}

impl<'g> NegativeSampler<'g> {
    pub fn new(graph: &'g ClinicalGraph, seed: u64) -> Self {
        Self { graph, entities: graph.entity_set().into_iter().collect(), rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn replaced(t: &Triple, head: bool, e: TokenId) -> Triple {
        if head {
            Triple::new(e, t.relation, t.object)
        } else {
            Triple::new(t.subject, t.relation, e)
        }
    }

    fn valid(&self, c: &Triple) -> bool {
        c.subject != c.object && !self.graph.contains(c)
    }

    /// Replace the head or the tail (never the relation) with an entity of
    /// the graph so that the result is not in the graph. `None` when no such
    /// replacement exists.
    pub fn corrupt(&mut self, t: &Triple) -> Option<Triple> {
        if self.entities.is_empty() {
            warn!("cannot corrupt {t:?}: the graph has no entities");
            return None;
        }
        for _ in 0..MAX_REJECTIONS {
            let head = self.rng.gen_bool(0.5);
            let e = self.entities[self.rng.gen_range(0..self.entities.len())];
            let c = Self::replaced(t, head, e);
            if self.valid(&c) {
                return Some(c);
            }
        }
        let options: Vec<Triple> = [true, false]
            .into_iter()
            .flat_map(|head| self.entities.iter().map(move |&e| Self::replaced(t, head, e)))
            .filter(|c| self.valid(c))
            .collect();
        if options.is_empty() {
            warn!("no valid corruption exists for {t:?}; skipping it");
            return None;
        }
        Some(options[self.rng.gen_range(0..options.len())])
    }
}

/// Rows scaled to unit L1 norm, so translation energies and the margin share
/// one scale; all-zero rows stay zero.
pub fn normalized_table(table: &Tensor) -> Tensor {
    let (r, c) = table.dims2();
    let mut out = table.clone();
    for i in 0..r {
        let row = &mut out.data_mut()[i * c..(i + 1) * c];
        let n = row.iter().map(|v| v.abs()).sum::<f64>();
        if n > 0.0 {
            row.iter_mut().for_each(|v| *v /= n);
        }
    }
    out
}

fn rows_of(table: &Tensor, ids: [TokenId; 3]) -> Tensor {
    let c = table.cols();
    let data = ids.iter().flat_map(|&i| table.row(i).iter().copied()).collect();
    Tensor::new(vec![3, c], data).expect("three rows of the table")
}

/// Triple restoration loss for one case.
///
/// Ground-truth triple `i` is aligned with slots `3i..3i+3`. The positive
/// energy compares the softmax-expected embeddings of those slots with the
/// ground-truth embeddings role by role; the negative energy is the
/// translation energy of the corrupted triple. `table` is treated as a
/// constant. Triples whose corruption is `None` are skipped.
pub fn triple_restoration_loss(
    tape: &mut Tape<'_>,
    slot_logits: Var,
    gt: &[Triple],
    negatives: &[Option<Triple>],
    table: &Tensor,
    gamma: f64,
) -> Result<Var, LossError> {
    if gt.len() != negatives.len() {
        return Err(LossError::Alignment(format!("{} triples but {} negatives", gt.len(), negatives.len())));
    }
    let slots = tape.value(slot_logits).rows() / 3;
    if gt.len() > slots {
        warn!("{} ground-truth triples but only {slots} slot triples; extra triples are unsupervised", gt.len());
    }
    let emb = tape.constant(table.clone());
    let mut total: Option<Var> = None;
    for (i, (t, neg)) in gt.iter().zip(negatives).take(slots).enumerate() {
        let Some(neg) = neg else { continue };
        let d_neg = transe_energy(table.row(neg.subject), table.row(neg.relation), table.row(neg.object));
        let rows = tape.slice_rows(slot_logits, 3 * i, 3)?;
        let probs = tape.softmax(rows)?;
        let expected = tape.matmul(probs, emb)?;
        let target = tape.constant(rows_of(table, t.ids()));
        let diff = tape.sub(expected, target)?;
        let d_pos = tape.l1(diff)?;
        let shifted = tape.add_scalar(d_pos, gamma - d_neg)?;
        let term = tape.relu(shifted)?;
        total = Some(match total {
            Some(acc) => tape.add(acc, term)?,
            None => term,
        });
    }
    Ok(match total {
        Some(v) => v,
        None => tape.constant(Tensor::scalar(0.0)),
    })
}

/// Teacher-forced report cross-entropy; [PAD] targets are ignored.
pub fn report_cross_entropy(tape: &mut Tape<'_>, logits: Var, targets: &[usize]) -> Result<Var, LossError> {
    let rows = tape.value(logits).rows();
    if rows != targets.len() {
        return Err(LossError::Alignment(format!("{rows} logit rows for {} targets", targets.len())));
    }
    Ok(tape.cross_entropy(logits, targets, PAD)?)
}

/// `λ_CE·ce + λ_TR·tr`
pub fn total_loss(tape: &mut Tape<'_>, ce: Var, tr: Var, w: &LossWeights) -> Result<Var, LossError> {
    if !tape.value(ce).is_finite() {
        return Err(LossError::NonFinite("cross-entropy"));
    }
    if !tape.value(tr).is_finite() {
        return Err(LossError::NonFinite("triple restoration"));
    }
    let a = tape.scale(ce, w.lambda_ce)?;
    let b = tape.scale(tr, w.lambda_tr)?;
    Ok(tape.add(a, b)?)
}
