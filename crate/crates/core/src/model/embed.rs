use super::{CgtModel, Ctx, ModelConfig, ModelError};
use crate::tensor::{Tensor, Var};
use crate::vocab::{PAD, SOS};

/// Token id stored at position 0, where the compressed visual token goes.
pub const VISUAL_MARKER: usize = SOS;

/// Sinusoidal encoding for dimension `dim` of position `pos`: sine on even
/// dimensions, cosine on odd, with wavelength base `base`.
pub fn position_encoding(pos: usize, dim: usize, d: usize, base: f64) -> f64 {
    let i = dim / 2;
    let angle = pos as f64 / base.powf(2.0 * i as f64 / d as f64);
    if dim.is_multiple_of(2) {
        angle.sin()
    } else {
        angle.cos()
    }
}

pub(super) fn position_table(n: usize, d: usize, base: f64) -> Tensor {
    let mut t = Tensor::zeros(&[n, d]);
    for pos in 0..n {
        for j in 0..d {
            t.data_mut()[pos * d + j] = position_encoding(pos, j, d, base);
        }
    }
    t
}

/// Encoder input: the visual slot, graph tokens in six-token groups, then padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<usize>,
    pub group_of: Vec<usize>,
    pub pad: Vec<bool>,
}

impl TokenSequence {
    /// Lay out `graph_tokens` after the visual slot and pad to `config.max_t`.
    pub fn new(graph_tokens: &[usize], config: &ModelConfig) -> Result<Self, ModelError> {
        let n = 1 + graph_tokens.len();
        if n > config.max_t {
            return Err(ModelError::Config(format!("{n} tokens exceed max_t {}", config.max_t)));
        }
        let mut tokens = Vec::with_capacity(config.max_t);
        tokens.push(VISUAL_MARKER);
        tokens.extend_from_slice(graph_tokens);
        tokens.resize(config.max_t, PAD);
        let group_of = (0..config.max_t)
            .map(|k| if k == 0 { 0 } else { 1 + (k - 1) / config.group_size })
            .collect();
        let pad = (0..config.max_t).map(|k| k >= n).collect();
        Ok(Self { tokens, group_of, pad })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl CgtModel {
    /// Sum of token (or visual) embedding, position encoding and segment embedding.
    pub fn embed_input(&self, ctx: &mut Ctx<'_, '_>, seq: &TokenSequence, visual: Var) -> Result<Var, ModelError> {
        let c = &self.config;
        if let Some(&g) = seq.group_of.iter().find(|&&g| g >= c.segment_count()) {
            return Err(ModelError::Config(format!("group {g} exceeds the segment table of {}", c.segment_count())));
        }
        let n = seq.len();
        let base = if n > 1 {
            let table = ctx.p("embed.token")?;
            let rest = ctx.tape.gather(table, &seq.tokens[1..])?;
            ctx.tape.concat_rows(&[visual, rest])?
        } else {
            visual
        };
        let pe = ctx.tape.constant(position_table(n, c.d_model, c.pe_base));
        let seg_table = ctx.p("embed.segment")?;
        let seg = ctx.tape.gather(seg_table, &seq.group_of)?;
        let x = ctx.tape.add(base, pe)?;
        Ok(ctx.tape.add(x, seg)?)
    }

    /// Decoder input: token embedding plus position encoding.
    pub(super) fn embed_target(&self, ctx: &mut Ctx<'_, '_>, ids: &[usize]) -> Result<Var, ModelError> {
        let table = ctx.p("embed.token")?;
        let tok = ctx.tape.gather(table, ids)?;
        let pe = ctx.tape.constant(position_table(ids.len(), self.config.d_model, self.config.pe_base));
        Ok(ctx.tape.add(tok, pe)?)
    }
}
