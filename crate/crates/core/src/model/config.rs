use serde::{Deserialize, Serialize};

use super::ModelError;

pub const FEATURE_ROWS: usize = 12;
pub const FEATURE_COLS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMode {
    LayerNorm,
    BatchNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub d_model: usize,
    pub heads: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub d_ff: usize,
    pub vocab_size: usize,
    pub max_t: usize,
    pub group_size: usize,
    pub pe_base: f64,
    pub norm: NormMode,
    pub graph_slots: usize,
    pub max_report_len: usize,
    pub tie_output: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::desk(0)
    }
}

impl ModelConfig {
    /// d=512, 6+6 layers, 8 heads.
    pub fn full(vocab_size: usize) -> Self {
        Self { d_model: 512, heads: 8, encoder_layers: 6, decoder_layers: 6, d_ff: 2048, ..Self::desk(vocab_size) }
    }

    /// d=64, 2+2 layers, 2 heads.
    pub fn desk(vocab_size: usize) -> Self {
        Self {
            d_model: 64,
            heads: 2,
            encoder_layers: 2,
            decoder_layers: 2,
            d_ff: 256,
            vocab_size,
            max_t: 90,
            group_size: 6,
            pe_base: 1000.0,
            norm: NormMode::LayerNorm,
            graph_slots: 84,
            max_report_len: 120,
            tie_output: false,
        }
    }

    /// d=16, 1+1 layers, 2 heads.
    pub fn tiny(vocab_size: usize) -> Self {
        Self { d_model: 16, heads: 2, encoder_layers: 1, decoder_layers: 1, d_ff: 32, ..Self::desk(vocab_size) }
    }

    pub fn preset(name: &str, vocab_size: usize) -> Option<Self> {
        match name {
            "full" => Some(Self::full(vocab_size)),
            "desk" => Some(Self::desk(vocab_size)),
            "tiny" => Some(Self::tiny(vocab_size)),
            _ => None,
        }
    }

    pub fn d_head(&self) -> usize {
        self.d_model / self.heads
    }

    /// Segment ids: 0 for the visual token, then one per group over the rest of the sequence.
    pub fn segment_count(&self) -> usize {
        1 + (self.max_t - 1).div_ceil(self.group_size)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.d_model == 0 || self.heads == 0 || !self.d_model.is_multiple_of(self.heads) {
            return bad(format!("d_model {} must be a positive multiple of heads {}", self.d_model, self.heads));
        }
        if self.group_size != 6 {
            return bad(format!("group_size must be 6, got {}", self.group_size));
        }
        if self.pe_base <= 0.0 || !self.pe_base.is_finite() {
            return bad(format!("pe_base must be positive, got {}", self.pe_base));
        }
        if self.graph_slots == 0 || !self.graph_slots.is_multiple_of(3) {
            return bad(format!("graph_slots must be a positive multiple of 3, got {}", self.graph_slots));
        }
        if self.graph_slots + 1 > self.max_t {
            return bad(format!("{} graph slots plus the visual token exceed max_t {}", self.graph_slots, self.max_t));
        }
        if self.vocab_size <= crate::vocab::NUM_SPECIAL {
            return bad(format!("vocab_size {} leaves no content tokens", self.vocab_size));
        }
        if self.d_ff == 0 || self.encoder_layers == 0 || self.decoder_layers == 0 || self.max_report_len == 0 {
            return bad("d_ff, layer counts and max_report_len must be positive".into());
        }
        Ok(())
    }
}
