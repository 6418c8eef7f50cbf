//! The report generator: sub-graph restoration from visual features, the
//! visibility-masked graph encoder, and the report decoder.

mod attention;
mod config;
mod decoder;
mod embed;
mod encoder;
mod generate;
mod init;
mod restore;
mod visible;

use log::warn;
use thiserror::Error;

use crate::tensor::{BatchStats, ParamStore, Tape, Tensor, TensorError, Var, BN_MOMENTUM, NORM_EPS};

pub use config::{ModelConfig, NormMode, FEATURE_COLS, FEATURE_ROWS};
pub use embed::{position_encoding, TokenSequence, VISUAL_MARKER};
pub use generate::Generation;
pub use restore::discretize_subgraph;
pub use visible::{build_visible_matrix, VisibleMatrix};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("config error: {0}")]
    Config(String),
    #[error("non-finite attention output in {stack} layer {layer}")]
    NonFinite { stack: &'static str, layer: usize },
    #[error("generation error: {0}")]
    Generation(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch norm uses batch statistics and reports them for running updates.
    Train,
    /// Batch norm uses running statistics.
    Eval,
}

/// A tape plus the per-forward bookkeeping the model needs.
pub struct Ctx<'a, 'p> {
    pub tape: &'a mut Tape<'p>,
    pub mode: Mode,
    /// Batch statistics observed in training mode, keyed by norm prefix.
    pub bn_stats: Vec<(String, BatchStats)>,
}

impl<'a, 'p> Ctx<'a, 'p> {
    pub fn new(tape: &'a mut Tape<'p>, mode: Mode) -> Self {
        Self { tape, mode, bn_stats: Vec::new() }
    }

    fn p(&mut self, name: &str) -> Result<Var, TensorError> {
        self.tape.param_named(name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgtModel {
    pub config: ModelConfig,
    pub params: ParamStore,
}

impl CgtModel {
    /// Fresh parameters from a seeded fan-based uniform initialization.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let params = init::init_params(&config, seed)?;
        Ok(Self { config, params })
    }

    /// Batch-norm prefixes that carry running statistics.
    pub fn bn_prefixes(&self) -> Vec<String> {
        let mut out = vec!["restore.bn".to_string()];
        if self.config.norm == NormMode::BatchNorm {
            out.extend(init::transformer_norm_prefixes(&self.config));
        }
        out
    }

    /// Apply observed batch statistics to the running buffers in order.
    pub fn update_running_stats(&mut self, stats: &[(String, BatchStats)]) -> Result<(), ModelError> {
        for (prefix, st) in stats {
            let mean_id = self.params.id(&format!("{prefix}.running_mean"))?;
            let var_id = self.params.id(&format!("{prefix}.running_var"))?;
            let count_id = self.params.id(&format!("{prefix}.updates"))?;
            for (r, b) in self.params.get_mut(mean_id).data_mut().iter_mut().zip(&st.mean) {
                *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * b;
            }
            for (r, b) in self.params.get_mut(var_id).data_mut().iter_mut().zip(&st.var) {
                *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * b;
            }
            self.params.get_mut(count_id).data_mut()[0] += 1.0;
        }
        Ok(())
    }

    /// Normalization over the rows of `x`, by the configured transformer norm.
    fn norm(&self, ctx: &mut Ctx<'_, '_>, x: Var, prefix: &str) -> Result<Var, ModelError> {
        match self.config.norm {
            NormMode::LayerNorm => {
                let g = ctx.p(&format!("{prefix}.gain"))?;
                let b = ctx.p(&format!("{prefix}.bias"))?;
                Ok(ctx.tape.layer_norm(x, g, b, NORM_EPS)?)
            }
            NormMode::BatchNorm => self.batch_norm(ctx, x, prefix),
        }
    }

    fn batch_norm(&self, ctx: &mut Ctx<'_, '_>, x: Var, prefix: &str) -> Result<Var, ModelError> {
        let g = ctx.p(&format!("{prefix}.gain"))?;
        let b = ctx.p(&format!("{prefix}.bias"))?;
        match ctx.mode {
            Mode::Train => {
                let (y, st) = ctx.tape.batch_norm_train(x, g, b, NORM_EPS)?;
                ctx.bn_stats.push((prefix.to_string(), st));
                Ok(y)
            }
            Mode::Eval => {
                if self.params.by_name(&format!("{prefix}.updates"))?.data()[0] == 0.0 {
                    warn!("{prefix}: evaluating batch norm before any training update; using initial statistics");
                }
                let mean = self.params.by_name(&format!("{prefix}.running_mean"))?.data().to_vec();
                let var = self.params.by_name(&format!("{prefix}.running_var"))?.data().to_vec();
                Ok(ctx.tape.batch_norm_eval(x, g, b, &mean, &var, NORM_EPS)?)
            }
        }
    }

    fn linear(&self, ctx: &mut Ctx<'_, '_>, x: Var, prefix: &str) -> Result<Var, ModelError> {
        let w = ctx.p(&format!("{prefix}.w"))?;
        let b = ctx.p(&format!("{prefix}.b"))?;
        let y = ctx.tape.matmul(x, w)?;
        Ok(ctx.tape.add_row(y, b)?)
    }

    /// Non-trainable named tensors (running statistics), for checkpoints.
    pub fn buffers(&self) -> Vec<(String, Tensor)> {
        self.params
            .ids()
            .filter(|&id| !self.params.is_trainable(id))
            .map(|id| (self.params.name(id).to_string(), self.params.get(id).clone()))
            .collect()
    }
}
