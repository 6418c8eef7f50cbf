use std::rc::Rc;

use super::{CgtModel, Ctx, ModelError};
use crate::tensor::Var;

impl CgtModel {
    /// Multi-head scaled dot-product attention. Queries come from `q_in`,
    /// keys and values from `kv_in`; `mask` (row-major `n_q × n_kv`) hides
    /// entries before the softmax so they receive exactly zero weight.
    pub(super) fn attention(
        &self,
        ctx: &mut Ctx<'_, '_>,
        q_in: Var,
        kv_in: Var,
        mask: Option<&Rc<Vec<bool>>>,
        prefix: &str,
    ) -> Result<Var, ModelError> {
        let dh = self.config.d_head();
        let scale = 1.0 / (dh as f64).sqrt();
        let q = self.linear(ctx, q_in, &format!("{prefix}.q"))?;
        let k = self.linear(ctx, kv_in, &format!("{prefix}.k"))?;
        let v = self.linear(ctx, kv_in, &format!("{prefix}.v"))?;
        let mut heads = Vec::with_capacity(self.config.heads);
        for h in 0..self.config.heads {
            let (qh, kh, vh) = if self.config.heads == 1 {
                (q, k, v)
            } else {
                (
                    ctx.tape.slice_cols(q, h * dh, dh)?,
                    ctx.tape.slice_cols(k, h * dh, dh)?,
                    ctx.tape.slice_cols(v, h * dh, dh)?,
                )
            };
            let scores = ctx.tape.matmul_nt(qh, kh)?;
            let scores = ctx.tape.scale(scores, scale)?;
            let weights = ctx.tape.masked_softmax(scores, mask)?;
            heads.push(ctx.tape.matmul(weights, vh)?);
        }
        let cat = if heads.len() == 1 { heads[0] } else { ctx.tape.concat_cols(&heads)? };
        self.linear(ctx, cat, &format!("{prefix}.o"))
    }

    pub(super) fn feed_forward(&self, ctx: &mut Ctx<'_, '_>, x: Var, prefix: &str) -> Result<Var, ModelError> {
        let h = self.linear(ctx, x, &format!("{prefix}.ffn1"))?;
        let h = ctx.tape.relu(h)?;
        self.linear(ctx, h, &format!("{prefix}.ffn2"))
    }
}
