use std::collections::BTreeSet;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{Prepared, RocScoring, TrainError};
use crate::data::Split;
use crate::extract::Triple;
use crate::losses::normalized_table;
use crate::metrics::{auc, roc_micro, MetricError, NlgScores, RocPoint};
use crate::model::{CgtModel, Generation};
use crate::tensor::Tensor;
use crate::vocab::{Vocabulary, NUM_SPECIAL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TripleTag {
    #[serde(rename = "TP")]
    TruePositive,
    #[serde(rename = "FP")]
    FalsePositive,
    #[serde(rename = "FN")]
    FalseNegative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedTriple {
    pub subject: String,
    pub relation: String,
    pub object: String,
    pub tag: TripleTag,
}

/// One line of `generations.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseEvaluation {
    pub case_id: String,
    pub report: String,
    pub reference: String,
    pub truncated: bool,
    pub restored_triples: Vec<TaggedTriple>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub split: Split,
    pub scores: NlgScores,
    /// `None` when every candidate shares one label.
    pub auc: Option<f64>,
    pub roc: Vec<RocPoint>,
    pub cases: Vec<CaseEvaluation>,
}

/// Consecutive slot tokens read as (subject, relation, object).
pub fn slot_triples(slot_ids: &[usize]) -> Vec<Triple> {
    slot_ids.chunks_exact(3).map(|c| Triple::new(c[0], c[1], c[2])).collect()
}

pub(crate) fn generate_indices(model: &CgtModel, data: &Prepared, idx: &[usize]) -> Result<Vec<Generation>, TrainError> {
    idx.iter().map(|&i| Ok(model.generate_greedy(&data.cases[i].features)?)).collect()
}

fn content_words(vocab: &Vocabulary, ids: &[usize]) -> Vec<String> {
    ids.iter().filter(|&&i| i >= NUM_SPECIAL).map(|&i| vocab.token(i).to_string()).collect()
}

/// Candidate and reference word lists for the NLG metrics.
pub(crate) fn nlg_inputs(data: &Prepared, idx: &[usize], gens: &[Generation]) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let cands = gens.iter().map(|g| content_words(&data.vocab, &g.report)).collect();
    let refs = idx.iter().map(|&i| data.cases[i].report_words.clone()).collect();
    (cands, refs)
}

fn softmax_rows(logits: &Tensor) -> Vec<Vec<f64>> {
    (0..logits.rows())
        .map(|r| {
            let row = logits.row(r);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
            let z: f64 = e.iter().sum();
            e.into_iter().map(|v| v / z).collect()
        })
        .collect()
}

/// Score every candidate triple against the restored slots of one case.
///
/// `Energy`: the negative smallest role-wise L1 distance between a slot
/// triple's expected embeddings and the candidate's normalized embeddings.
/// `Probability`: the largest product of the three slot probabilities.
pub fn triple_scores(slot_logits: &Tensor, table: &Tensor, candidates: &[Triple], scoring: RocScoring) -> Vec<f64> {
    let probs = softmax_rows(slot_logits);
    let n = probs.len() / 3;
    match scoring {
        RocScoring::Probability => candidates
            .iter()
            .map(|c| {
                (0..n)
                    .map(|k| probs[3 * k][c.subject] * probs[3 * k + 1][c.relation] * probs[3 * k + 2][c.object])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect(),
        RocScoring::Energy => {
            let d = table.cols();
            let expected: Vec<Vec<f64>> = probs[..3 * n]
                .iter()
                .map(|p| {
                    let mut e = vec![0.0; d];
                    for (t, &pt) in p.iter().enumerate() {
                        for (ej, tj) in e.iter_mut().zip(table.row(t)) {
                            *ej += pt * tj;
                        }
                    }
                    e
                })
                .collect();
            let l1 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();
            candidates
                .iter()
                .map(|c| {
                    let best = (0..n)
                        .map(|k| {
                            l1(&expected[3 * k], table.row(c.subject))
                                + l1(&expected[3 * k + 1], table.row(c.relation))
                                + l1(&expected[3 * k + 2], table.row(c.object))
                        })
                        .fold(f64::INFINITY, f64::min);
                    -best
                })
                .collect()
        }
    }
}

/// Restored graph triples against the ground truth. Restored triples are the
/// distinct slot triples that occur in the clinical graph.
fn tag_triples(data: &Prepared, restored: &[Triple], truth: &[Triple]) -> Vec<TaggedTriple> {
    let word = |i: usize| data.vocab.token(i).to_string();
    let tagged = |t: &Triple, tag| TaggedTriple { subject: word(t.subject), relation: word(t.relation), object: word(t.object), tag };
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for t in restored.iter().filter(|t| data.graph.contains(t)) {
        if seen.insert(*t) {
            let tag = if truth.contains(t) { TripleTag::TruePositive } else { TripleTag::FalsePositive };
            out.push(tagged(t, tag));
        }
    }
    for t in truth.iter().filter(|t| !seen.contains(t)) {
        out.push(tagged(t, TripleTag::FalseNegative));
    }
    out
}

/// Greedy generations, NLG scores and the micro-averaged ROC over every
/// (case, graph triple) pair of a split.
pub fn evaluate(model: &CgtModel, data: &Prepared, split: Split, scoring: RocScoring) -> Result<Evaluation, TrainError> {
    let idx = data.split_indices(split);
    if idx.is_empty() {
        return Err(TrainError::Config(format!("the {split} split is empty")));
    }
    let gens = generate_indices(model, data, &idx)?;
    let (cands, refs) = nlg_inputs(data, &idx, &gens);
    let scores = NlgScores::compute(&cands, &refs);

    let table = normalized_table(model.params.by_name("embed.token")?);
    let candidates = data.graph.triples();
    let (mut all_scores, mut labels) = (Vec::new(), Vec::new());
    let mut cases = Vec::with_capacity(idx.len());
    for (&i, g) in idx.iter().zip(&gens) {
        let case = &data.cases[i];
        all_scores.extend(triple_scores(&g.slot_logits, &table, candidates, scoring));
        labels.extend(candidates.iter().map(|t| case.triples.contains(t)));
        cases.push(CaseEvaluation {
            case_id: case.id.clone(),
            report: content_words(&data.vocab, &g.report).join(" "),
            reference: case.report_words.join(" "),
            truncated: g.truncated,
            restored_triples: tag_triples(data, &slot_triples(&g.slot_ids), &case.triples),
        });
    }
    let (auc_value, roc) = match roc_micro(&all_scores, &labels) {
        Ok(points) => (Some(auc(&points)?), points),
        Err(MetricError::Undefined(msg)) => {
            warn!("ROC undefined on the {split} split: {msg}");
            (None, Vec::new())
        }
        Err(e) => return Err(e.into()),
    };
    Ok(Evaluation { split, scores, auc: auc_value, roc, cases })
}
