use log::info;
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::evaluate::{generate_indices, nlg_inputs};
use super::{derive_seed, Prepared, PreparedCase, RunConfig, TrainError};
use crate::data::Split;
use crate::extract::{ClinicalGraph, Triple};
use crate::losses::{normalized_table, report_cross_entropy, total_loss, triple_restoration_loss, LossError, LossWeights, NegativeSampler};
use crate::metrics::cider;
use crate::model::{CgtModel, Ctx, Mode};
use crate::tensor::{AdamState, BatchStats, Gradients, ParamStore, Tape, Tensor, TensorError, Var};

/// Loss values of one batch, averaged over its cases, and optionally the
/// gradient of the averaged total.
pub struct BatchObjective {
    pub ce: f64,
    pub tr: f64,
    pub total: f64,
    pub grads: Option<Gradients>,
    pub bn_stats: Vec<(String, BatchStats)>,
}

/// The constant embedding table of the restoration loss: the token table
/// with unit-L1 rows.
pub fn restoration_table(model: &CgtModel) -> Result<Tensor, TrainError> {
    Ok(normalized_table(model.params.by_name("embed.token")?))
}

/// Teacher-forced objective for a batch in training mode. `negatives[i]`
/// holds one corruption per ground-truth triple of `cases[i]`; `table` is
/// the restoration table, which receives no gradient.
pub fn batch_objective(
    model: &CgtModel,
    cases: &[&PreparedCase],
    negatives: &[Vec<Option<Triple>>],
    table: &Tensor,
    weights: &LossWeights,
    with_grad: bool,
) -> Result<BatchObjective, TrainError> {
    if cases.is_empty() || cases.len() != negatives.len() {
        return Err(TrainError::Config(format!("{} cases but {} negative lists", cases.len(), negatives.len())));
    }
    let mut tape = Tape::new(&model.params);
    let mut ctx = Ctx::new(&mut tape, Mode::Train);
    let feats: Vec<Var> = cases.iter().map(|c| ctx.tape.constant(c.features.clone())).collect();
    let slots = model.restore_subgraph(&mut ctx, &feats)?;

    let (mut ce_sum, mut tr_sum) = (0.0, 0.0);
    let mut totals = Vec::with_capacity(cases.len());
    for (i, case) in cases.iter().enumerate() {
        let (memory, seq) = model.encode_case(&mut ctx, feats[i], slots[i])?;
        let logits = model.decode(&mut ctx, &case.decoder_input(), memory, &seq.pad)?;
        let ce = report_cross_entropy(ctx.tape, logits, &case.target)?;
        let tr = triple_restoration_loss(ctx.tape, slots[i], &case.triples, &negatives[i], table, weights.gamma)?;
        ce_sum += ctx.tape.value(ce).item();
        tr_sum += ctx.tape.value(tr).item();
        totals.push(total_loss(ctx.tape, ce, tr, weights)?);
    }
    let n = cases.len() as f64;
    let sum = if totals.len() == 1 { totals[0] } else { ctx.tape.concat_rows(&totals).and_then(|v| ctx.tape.sum(v))? };
    let loss = ctx.tape.scale(sum, 1.0 / n)?;
    let total = ctx.tape.value(loss).item();
    if !total.is_finite() {
        return Err(LossError::NonFinite("total").into());
    }
    let grads = if with_grad { Some(ctx.tape.backward(loss)?) } else { None };
    let bn_stats = std::mem::take(&mut ctx.bn_stats);
    Ok(BatchObjective { ce: ce_sum / n, tr: tr_sum / n, total, grads, bn_stats })
}

/// Mean losses of one epoch over the train cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub ce: f64,
    pub tr: f64,
    pub total: f64,
    pub val_cider: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Best {
    pub epoch: usize,
    pub cider: Option<f64>,
    pub params: ParamStore,
}

/// Model, optimizer and bookkeeping of a run; everything needed to resume.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: RunConfig,
    pub model: CgtModel,
    pub adam: AdamState,
    /// Completed epochs.
    pub epoch: usize,
    pub history: Vec<EpochLoss>,
    pub best: Option<Best>,
}

impl Trainer {
    pub fn new(config: RunConfig, vocab_size: usize) -> Result<Self, TrainError> {
        config.validate()?;
        let model = CgtModel::new(config.model_config(vocab_size)?, derive_seed(config.seed, "init", &[]))?;
        let adam = AdamState::new(&model.params, config.lr);
        Ok(Self { config, model, adam, epoch: 0, history: Vec::new(), best: None })
    }

    /// Corruptions for one case, from a sampler seeded by run, epoch and case.
    pub fn negatives(&self, graph: &ClinicalGraph, case: &PreparedCase, epoch: usize, case_index: usize) -> Vec<Option<Triple>> {
        let mut sampler = NegativeSampler::new(graph, derive_seed(self.config.seed, "negatives", &[epoch as u64, case_index as u64]));
        case.triples.iter().map(|t| sampler.corrupt(t)).collect()
    }

    /// Train-split case indices in this epoch's order.
    pub fn epoch_order(&self, data: &Prepared, epoch: usize) -> Vec<usize> {
        let mut order = data.split_indices(Split::Train);
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(self.config.seed, "shuffle", &[epoch as u64])));
        order
    }

    pub fn train_epoch(&mut self, data: &Prepared) -> Result<EpochLoss, TrainError> {
        let epoch = self.epoch;
        let order = self.epoch_order(data, epoch);
        if order.is_empty() {
            return Err(TrainError::Config("the train split is empty".into()));
        }
        let weights = self.config.loss_weights();
        let (mut ce, mut tr, mut total) = (0.0, 0.0, 0.0);
        for (step, batch) in order.chunks(self.config.batch_size).enumerate() {
            let cases: Vec<&PreparedCase> = batch.iter().map(|&i| &data.cases[i]).collect();
            let negatives: Vec<_> = batch.iter().map(|&i| self.negatives(&data.graph, &data.cases[i], epoch, i)).collect();
            let non_finite = |msg: String| TrainError::NonFinite { epoch, step, msg };
            let table = restoration_table(&self.model)?;
            let obj = match batch_objective(&self.model, &cases, &negatives, &table, &weights, true) {
                Ok(o) => o,
                Err(TrainError::Loss(e @ LossError::NonFinite(_))) => return Err(non_finite(e.to_string())),
                Err(e) => return Err(e),
            };
            let grads = obj.grads.as_ref().expect("gradients requested");
            match self.adam.step(&mut self.model.params, grads) {
                Ok(()) => {}
                Err(e @ TensorError::NonFinite(_)) => return Err(non_finite(e.to_string())),
                Err(e) => return Err(e.into()),
            }
            self.model.update_running_stats(&obj.bn_stats)?;
            let w = batch.len() as f64;
            ce += obj.ce * w;
            tr += obj.tr * w;
            total += obj.total * w;
        }
        let n = order.len() as f64;
        self.epoch += 1;
        Ok(EpochLoss { epoch: self.epoch, ce: ce / n, tr: tr / n, total: total / n, val_cider: None })
    }

    fn validation_due(&self, data: &Prepared) -> bool {
        !data.split_indices(Split::Val).is_empty()
            && (self.epoch.is_multiple_of(self.config.val_every) || self.epoch == self.config.epochs)
    }

    /// Corpus CIDEr of greedy generations on the validation split.
    pub fn validation_cider(&self, data: &Prepared) -> Result<f64, TrainError> {
        let idx = data.split_indices(Split::Val);
        let gens = generate_indices(&self.model, data, &idx)?;
        let (cands, refs) = nlg_inputs(data, &idx, &gens);
        Ok(cider(&cands, &refs))
    }

    /// One epoch plus validation and best-checkpoint tracking. Without a
    /// validation split the latest parameters are kept.
    pub fn step_epoch(&mut self, data: &Prepared) -> Result<EpochLoss, TrainError> {
        let mut rec = self.train_epoch(data)?;
        if self.validation_due(data) {
            let c = self.validation_cider(data)?;
            rec.val_cider = Some(c);
            if self.best.as_ref().and_then(|b| b.cider).is_none_or(|b| c > b) {
                self.best = Some(Best { epoch: self.epoch, cider: Some(c), params: self.model.params.clone() });
            }
        } else if data.split_indices(Split::Val).is_empty() {
            self.best = Some(Best { epoch: self.epoch, cider: None, params: self.model.params.clone() });
        }
        info!(
            "epoch {}: ce {:.6} tr {:.6} total {:.6}{}",
            rec.epoch,
            rec.ce,
            rec.tr,
            rec.total,
            rec.val_cider.map(|c| format!(" val cider {c:.4}")).unwrap_or_default()
        );
        self.history.push(rec);
        Ok(rec)
    }

    /// Train up to the configured epoch count, calling `after_epoch` after each.
    pub fn fit(&mut self, data: &Prepared, mut after_epoch: impl FnMut(&Trainer) -> Result<(), TrainError>) -> Result<(), TrainError> {
        while self.epoch < self.config.epochs {
            self.step_epoch(data)?;
            after_epoch(self)?;
        }
        Ok(())
    }

    /// The selected model: best validation CIDEr, or the current parameters.
    pub fn best_model(&self) -> CgtModel {
        let mut m = self.model.clone();
        if let Some(b) = &self.best {
            m.params = b.params.clone();
        }
        m
    }

    /// Named tensors holding the full resumable state.
    pub fn state_records(&self) -> Vec<(String, Tensor)> {
        let p = &self.model.params;
        let mut out: Vec<(String, Tensor)> = Vec::new();
        for id in p.ids() {
            out.push((format!("param/{}", p.name(id)), p.get(id).clone()));
        }
        for id in p.trainable_ids() {
            let shape = p.get(id).shape().to_vec();
            let m = Tensor::new(shape.clone(), self.adam.first_moment(id.index()).to_vec()).expect("moment shape");
            let v = Tensor::new(shape, self.adam.second_moment(id.index()).to_vec()).expect("moment shape");
            out.push((format!("adam.m/{}", p.name(id)), m));
            out.push((format!("adam.v/{}", p.name(id)), v));
        }
        if let Some(b) = &self.best {
            for id in b.params.ids() {
                out.push((format!("best/{}", b.params.name(id)), b.params.get(id).clone()));
            }
        }
        let (has_best, best_epoch, has_cider, best_cider) = match &self.best {
            Some(b) => (1.0, b.epoch as f64, b.cider.is_some() as u8 as f64, b.cider.unwrap_or(0.0)),
            None => (0.0, 0.0, 0.0, 0.0),
        };
        let meta = vec![self.adam.step_count() as f64, self.epoch as f64, has_best, best_epoch, has_cider, best_cider];
        out.push(("meta".into(), Tensor::new(vec![meta.len()], meta).expect("meta")));
        if !self.history.is_empty() {
            let rows: Vec<f64> = self
                .history
                .iter()
                .flat_map(|h| [h.epoch as f64, h.ce, h.tr, h.total, h.val_cider.is_some() as u8 as f64, h.val_cider.unwrap_or(0.0)])
                .collect();
            out.push(("history".into(), Tensor::new(vec![self.history.len(), 6], rows).expect("history")));
        }
        out
    }

    /// Rebuild a trainer from `state_records` output.
    pub fn from_state(config: RunConfig, vocab_size: usize, records: Vec<(String, Tensor)>) -> Result<Self, TrainError> {
        let mut t = Self::new(config, vocab_size)?;
        let bad = |m: String| TrainError::Checkpoint(m);
        let mut best_params = t.model.params.clone();
        let mut has_best_records = false;
        let n = t.model.params.len();
        let mut first: Vec<Vec<f64>> = vec![Vec::new(); n];
        let mut second: Vec<Vec<f64>> = vec![Vec::new(); n];
        let mut meta: Option<Tensor> = None;
        let mut seen = 0usize;
        for (name, tensor) in records {
            if let Some(p) = name.strip_prefix("param/") {
                let id = t.model.params.id(p)?;
                t.model.params.set(id, tensor)?;
                seen += 1;
            } else if let Some(p) = name.strip_prefix("best/") {
                let id = best_params.id(p)?;
                best_params.set(id, tensor)?;
                has_best_records = true;
            } else if let Some(p) = name.strip_prefix("adam.m/") {
                first[t.model.params.id(p)?.index()] = tensor.data().to_vec();
            } else if let Some(p) = name.strip_prefix("adam.v/") {
                second[t.model.params.id(p)?.index()] = tensor.data().to_vec();
            } else if name == "meta" {
                meta = Some(tensor);
            } else if name == "history" {
                let (r, c) = tensor.dims2();
                if c != 6 {
                    return Err(bad(format!("history has {c} columns")));
                }
                t.history = (0..r)
                    .map(|i| {
                        let h = tensor.row(i);
                        EpochLoss { epoch: h[0] as usize, ce: h[1], tr: h[2], total: h[3], val_cider: (h[4] != 0.0).then_some(h[5]) }
                    })
                    .collect();
            } else {
                return Err(bad(format!("unexpected record `{name}`")));
            }
        }
        if seen != n {
            return Err(bad(format!("state holds {seen} of {n} parameters")));
        }
        let meta = meta.ok_or_else(|| bad("missing meta record".into()))?;
        let m = meta.data();
        if m.len() != 6 {
            return Err(bad("malformed meta record".into()));
        }
        t.adam.restore(m[0] as u64, first, second)?;
        t.epoch = m[1] as usize;
        if m[2] != 0.0 {
            if !has_best_records {
                return Err(bad("best parameters missing".into()));
            }
            t.best = Some(Best { epoch: m[3] as usize, cider: (m[4] != 0.0).then_some(m[5]), params: best_params });
        }
        Ok(t)
    }
}
