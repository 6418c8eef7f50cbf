use log::debug;

use super::{build_visible_matrix, discretize_subgraph, CgtModel, Ctx, Mode, ModelError, TokenSequence};
use crate::tensor::{Tape, Tensor, Var};
use crate::vocab::{EOS, SOS};

/// Result of greedy decoding for one case.
#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    /// Report token ids, without [SOS] and [EOS].
    pub report: Vec<usize>,
    /// Restored graph tokens (per-slot argmax).
    pub slot_ids: Vec<usize>,
    pub slot_logits: Tensor,
    /// True when decoding stopped at the length limit rather than at [EOS].
    pub truncated: bool,
}

impl CgtModel {
    /// Restored graph tokens, visual token, embedding and encoder for one case.
    pub fn encode_case(&self, ctx: &mut Ctx<'_, '_>, features: Var, slot_logits: Var) -> Result<(Var, TokenSequence), ModelError> {
        let ids = discretize_subgraph(ctx.tape.value(slot_logits));
        let seq = TokenSequence::new(&ids, &self.config)?;
        let visual = self.compress_visual_token(ctx, features)?;
        let embedded = self.embed_input(ctx, &seq, visual)?;
        let visible = build_visible_matrix(&seq);
        let memory = self.encode(ctx, embedded, &visible)?;
        Ok((memory, seq))
    }

    /// Argmax chain from [SOS] until [EOS] or the length limit.
    pub fn generate_greedy(&self, features: &Tensor) -> Result<Generation, ModelError> {
        let mut tape = Tape::new(&self.params);
        let mut ctx = Ctx::new(&mut tape, Mode::Eval);
        let f = ctx.tape.constant(features.clone());
        let logits = self.restore_subgraph(&mut ctx, &[f])?[0];
        let (memory, seq) = self.encode_case(&mut ctx, f, logits)?;
        let mut prefix = vec![SOS];
        let mut truncated = true;
        while prefix.len() <= self.config.max_report_len {
            let step = self.decode_step(&mut ctx, &prefix, memory, &seq.pad)?;
            let next = ctx.tape.value(step).argmax_rows_from(0)[0];
            if next == EOS {
                truncated = false;
                break;
            }
            prefix.push(next);
        }
        if truncated {
            debug!("generation truncated at {} tokens", self.config.max_report_len);
        }
        let slot_logits = ctx.tape.value(logits).clone();
        Ok(Generation {
            report: prefix[1..].to_vec(),
            slot_ids: seq.tokens[1..=self.config.graph_slots].to_vec(),
            slot_logits,
            truncated,
        })
    }
}
