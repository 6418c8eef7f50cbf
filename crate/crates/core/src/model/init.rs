use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{FEATURE_COLS, FEATURE_ROWS};
use super::{ModelConfig, ModelError, NormMode};
use crate::tensor::{ParamStore, Tensor};

struct Builder {
    store: ParamStore,
    rng: ChaCha8Rng,
}

impl Builder {
    fn uniform(&mut self, name: &str, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Result<(), ModelError> {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..rows * cols).map(|_| self.rng.gen_range(-a..a)).collect();
        self.store.insert(name, Tensor::new(vec![rows, cols], data)?, true)?;
        Ok(())
    }

    fn matrix(&mut self, name: &str, rows: usize, cols: usize) -> Result<(), ModelError> {
        self.uniform(name, rows, cols, rows, cols)
    }

    fn fill(&mut self, name: &str, shape: &[usize], value: f64, trainable: bool) -> Result<(), ModelError> {
        self.store.insert(name, Tensor::full(shape, value), trainable)?;
        Ok(())
    }

    fn linear(&mut self, prefix: &str, d_in: usize, d_out: usize) -> Result<(), ModelError> {
        self.matrix(&format!("{prefix}.w"), d_in, d_out)?;
        self.fill(&format!("{prefix}.b"), &[d_out], 0.0, true)
    }

    fn norm(&mut self, prefix: &str, d: usize, mode: NormMode) -> Result<(), ModelError> {
        self.fill(&format!("{prefix}.gain"), &[d], 1.0, true)?;
        self.fill(&format!("{prefix}.bias"), &[d], 0.0, true)?;
        if mode == NormMode::BatchNorm {
            self.running(prefix, d)?;
        }
        Ok(())
    }

    fn running(&mut self, prefix: &str, d: usize) -> Result<(), ModelError> {
        self.fill(&format!("{prefix}.running_mean"), &[d], 0.0, false)?;
        self.fill(&format!("{prefix}.running_var"), &[d], 1.0, false)?;
        self.fill(&format!("{prefix}.updates"), &[1], 0.0, false)
    }

    fn attention(&mut self, prefix: &str, d: usize) -> Result<(), ModelError> {
        for p in ["q", "k", "v", "o"] {
            self.linear(&format!("{prefix}.{p}"), d, d)?;
        }
        Ok(())
    }
}

pub(super) fn transformer_norm_prefixes(c: &ModelConfig) -> Vec<String> {
    let mut out = Vec::new();
    for l in 0..c.encoder_layers {
        out.push(format!("enc.{l}.norm1"));
        out.push(format!("enc.{l}.norm2"));
    }
    for l in 0..c.decoder_layers {
        for n in 1..=3 {
            out.push(format!("dec.{l}.norm{n}"));
        }
    }
    out
}

pub(super) fn init_params(c: &ModelConfig, seed: u64) -> Result<ParamStore, ModelError> {
    let mut b = Builder { store: ParamStore::new(), rng: ChaCha8Rng::seed_from_u64(seed) };
    let d = c.d_model;
    let v = c.vocab_size;

    b.matrix("embed.token", v, d)?;
    b.matrix("embed.segment", c.segment_count(), d)?;

    b.uniform("restore.conv.w", 1, 9, 9, 9)?;
    b.fill("restore.conv.b", &[1], 0.0, true)?;
    b.fill("restore.bn.gain", &[1], 1.0, true)?;
    b.fill("restore.bn.bias", &[1], 0.0, true)?;
    b.running("restore.bn", 1)?;
    b.uniform("restore.pool.w", c.graph_slots, FEATURE_ROWS, FEATURE_ROWS, c.graph_slots)?;
    b.fill("restore.pool.b", &[c.graph_slots, 1], 0.0, true)?;
    b.linear("restore.out", FEATURE_COLS, v)?;

    b.linear("compress", FEATURE_COLS, d)?;

    for l in 0..c.encoder_layers {
        let p = format!("enc.{l}");
        b.attention(&format!("{p}.attn"), d)?;
        b.norm(&format!("{p}.norm1"), d, c.norm)?;
        b.linear(&format!("{p}.ffn1"), d, c.d_ff)?;
        b.linear(&format!("{p}.ffn2"), c.d_ff, d)?;
        b.norm(&format!("{p}.norm2"), d, c.norm)?;
    }
    for l in 0..c.decoder_layers {
        let p = format!("dec.{l}");
        b.attention(&format!("{p}.self"), d)?;
        b.norm(&format!("{p}.norm1"), d, c.norm)?;
        b.attention(&format!("{p}.cross"), d)?;
        b.norm(&format!("{p}.norm2"), d, c.norm)?;
        b.linear(&format!("{p}.ffn1"), d, c.d_ff)?;
        b.linear(&format!("{p}.ffn2"), c.d_ff, d)?;
        b.norm(&format!("{p}.norm3"), d, c.norm)?;
    }
    if c.tie_output {
        b.fill("out.b", &[v], 0.0, true)?;
    } else {
        b.linear("out", d, v)?;
    }
    Ok(b.store)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_determinism() {
        let c = ModelConfig::tiny(50);
        let a = init_params(&c, 3).unwrap();
        let b = init_params(&c, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.by_name("restore.out.w").unwrap().shape(), &[1024, 50]);
        assert_eq!(a.by_name("embed.segment").unwrap().shape(), &[16, 16]);
        assert!(!a.is_trainable(a.id("restore.bn.running_var").unwrap()));
        let c2 = init_params(&c, 4).unwrap();
        assert_ne!(a, c2);
    }
}
