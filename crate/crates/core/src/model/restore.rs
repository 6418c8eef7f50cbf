use super::config::{FEATURE_COLS, FEATURE_ROWS};
use super::{CgtModel, Ctx, Mode, ModelError};
use crate::tensor::{Tensor, Var, NORM_EPS};
use crate::vocab::NUM_SPECIAL;

impl CgtModel {
    /// Slot logits `[graph_slots × vocab]` for each feature map in `features`
    /// (each a `12×1024` tape value). Batch norm pools statistics over the
    /// whole batch in training mode.
    ///
    /// The temporal pooling `A·h + c` and the output map `W_f` are applied
    /// as `A·(h·W_f) + c·(1ᵀW_f) + b_f`, which equals `(A·h + c)·W_f + b_f`.
    pub fn restore_subgraph(&self, ctx: &mut Ctx<'_, '_>, features: &[Var]) -> Result<Vec<Var>, ModelError> {
        let plane = FEATURE_ROWS * FEATURE_COLS;
        let w = ctx.p("restore.conv.w")?;
        let b = ctx.p("restore.conv.b")?;
        let mut columns = Vec::with_capacity(features.len());
        for &f in features {
            if ctx.tape.value(f).shape() != [FEATURE_ROWS, FEATURE_COLS] {
                return Err(crate::tensor::TensorError::Shape(format!(
                    "visual features must be {FEATURE_ROWS}×{FEATURE_COLS}, got {:?}",
                    ctx.tape.value(f).shape()
                ))
                .into());
            }
            let conv = ctx.tape.conv3x3(f, w, b)?;
            columns.push(ctx.tape.reshape(conv, &[plane, 1])?);
        }
        let stacked = if columns.len() == 1 { columns[0] } else { ctx.tape.concat_rows(&columns)? };
        let normed = match ctx.mode {
            Mode::Train => {
                let g = ctx.p("restore.bn.gain")?;
                let bb = ctx.p("restore.bn.bias")?;
                let (y, st) = ctx.tape.batch_norm_train(stacked, g, bb, NORM_EPS)?;
                ctx.bn_stats.push(("restore.bn".to_string(), st));
                y
            }
            Mode::Eval => self.batch_norm(ctx, stacked, "restore.bn")?,
        };

        let wf = ctx.p("restore.out.w")?;
        let bf = ctx.p("restore.out.b")?;
        let a = ctx.p("restore.pool.w")?;
        let c = ctx.p("restore.pool.b")?;
        let ones = ctx.tape.constant(Tensor::full(&[1, FEATURE_COLS], 1.0));
        let colsum = ctx.tape.matmul(ones, wf)?;
        let offset = ctx.tape.matmul(c, colsum)?;

        let mut out = Vec::with_capacity(features.len());
        for i in 0..features.len() {
            let part = if features.len() == 1 { normed } else { ctx.tape.slice_rows(normed, i * plane, plane)? };
            let map = ctx.tape.reshape(part, &[FEATURE_ROWS, FEATURE_COLS])?;
            let h = ctx.tape.relu(map)?;
            let hw = ctx.tape.matmul(h, wf)?;
            let pooled = ctx.tape.matmul(a, hw)?;
            let shifted = ctx.tape.add(pooled, offset)?;
            out.push(ctx.tape.add_row(shifted, bf)?);
        }
        Ok(out)
    }

    /// Mean over the temporal rows, then an affine map to `d_model`.
    pub fn compress_visual_token(&self, ctx: &mut Ctx<'_, '_>, features: Var) -> Result<Var, ModelError> {
        let mean = ctx.tape.mean_rows(features)?;
        self.linear(ctx, mean, "compress")
    }
}

/// Per-slot argmax over non-special tokens; ties go to the lowest id.
pub fn discretize_subgraph(logits: &Tensor) -> Vec<usize> {
    logits.argmax_rows_from(NUM_SPECIAL)
}
