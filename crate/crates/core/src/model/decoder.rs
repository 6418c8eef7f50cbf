use std::rc::Rc;

use super::{CgtModel, Ctx, ModelError};
use crate::tensor::Var;

/// Lower-triangular visibility for `n` decoder positions.
fn causal_mask(n: usize) -> Rc<Vec<bool>> {
    Rc::new((0..n * n).map(|k| k % n <= k / n).collect())
}

/// Every query row sees the non-padding encoder positions.
fn memory_mask(rows: usize, pad: &[bool]) -> Rc<Vec<bool>> {
    Rc::new((0..rows).flat_map(|_| pad.iter().map(|&p| !p)).collect())
}

impl CgtModel {
    /// Next-token logits for every position of `prefix` (which starts with
    /// [SOS]), attending causally over the prefix and to the encoder memory.
    pub fn decode(&self, ctx: &mut Ctx<'_, '_>, prefix: &[usize], memory: Var, memory_pad: &[bool]) -> Result<Var, ModelError> {
        let n = prefix.len();
        if n == 0 {
            return Err(ModelError::Generation("empty decoder prefix".into()));
        }
        if n > self.config.max_report_len + 1 {
            return Err(ModelError::Generation(format!(
                "prefix of {n} tokens exceeds the maximum report length {}",
                self.config.max_report_len
            )));
        }
        let causal = causal_mask(n);
        let cross = memory_mask(n, memory_pad);
        let mut x = self.embed_target(ctx, prefix)?;
        for l in 0..self.config.decoder_layers {
            let p = format!("dec.{l}");
            let a = self.attention(ctx, x, x, Some(&causal), &format!("{p}.self"))?;
            let r = ctx.tape.add(a, x)?;
            let s = self.norm(ctx, r, &format!("{p}.norm1"))?;
            let c = self.attention(ctx, s, memory, Some(&cross), &format!("{p}.cross"))?;
            if !ctx.tape.value(c).is_finite() {
                return Err(ModelError::NonFinite { stack: "decoder", layer: l });
            }
            let r = ctx.tape.add(c, s)?;
            let s = self.norm(ctx, r, &format!("{p}.norm2"))?;
            let f = self.feed_forward(ctx, s, &p)?;
            let r = ctx.tape.add(f, s)?;
            x = self.norm(ctx, r, &format!("{p}.norm3"))?;
        }
        self.output_logits(ctx, x)
    }

    fn output_logits(&self, ctx: &mut Ctx<'_, '_>, x: Var) -> Result<Var, ModelError> {
        if self.config.tie_output {
            let table = ctx.p("embed.token")?;
            let b = ctx.p("out.b")?;
            let y = ctx.tape.matmul_nt(x, table)?;
            Ok(ctx.tape.add_row(y, b)?)
        } else {
            self.linear(ctx, x, "out")
        }
    }

    /// Logits for the token after `prefix`, shape `1 × vocab`.
    pub fn decode_step(&self, ctx: &mut Ctx<'_, '_>, prefix: &[usize], memory: Var, memory_pad: &[bool]) -> Result<Var, ModelError> {
        let all = self.decode(ctx, prefix, memory, memory_pad)?;
        Ok(ctx.tape.slice_rows(all, prefix.len() - 1, 1)?)
    }
}
