use super::{CgtModel, Ctx, ModelError, VisibleMatrix};
use crate::tensor::Var;

impl CgtModel {
    /// Stack of masked self-attention and feed-forward blocks, each followed
    /// by a residual connection and normalization.
    pub fn encode(&self, ctx: &mut Ctx<'_, '_>, embedded: Var, visible: &VisibleMatrix) -> Result<Var, ModelError> {
        let mut x = embedded;
        for l in 0..self.config.encoder_layers {
            let p = format!("enc.{l}");
            let a = self.attention(ctx, x, x, Some(&visible.visible), &format!("{p}.attn"))?;
            if !ctx.tape.value(a).is_finite() {
                return Err(ModelError::NonFinite { stack: "encoder", layer: l });
            }
            let r = ctx.tape.add(a, x)?;
            let e = self.norm(ctx, r, &format!("{p}.norm1"))?;
            let f = self.feed_forward(ctx, e, &p)?;
            let r = ctx.tape.add(f, e)?;
            x = self.norm(ctx, r, &format!("{p}.norm2"))?;
        }
        Ok(x)
    }
}
