use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::extract::{Dictionary, Extractor, RelationLexicon};
use crate::losses::LossWeights;
use crate::model::{ModelConfig, NormMode};
use crate::vocab::DEFAULT_MIN_FREQUENCY;

/// How a candidate triple is scored against a case's restored slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RocScoring {
    /// Negative role-wise L1 distance to the closest slot triple.
    Energy,
    /// Largest product of the three slot probabilities.
    Probability,
}

/// Every knob of a run. Keys are flat so that `key=value` overrides apply directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub preset: String,
    pub d_model: Option<usize>,
    pub heads: Option<usize>,
    pub encoder_layers: Option<usize>,
    pub decoder_layers: Option<usize>,
    pub d_ff: Option<usize>,
    pub graph_slots: usize,
    pub max_t: usize,
    pub pe_base: f64,
    pub norm: NormMode,
    pub max_report_len: usize,
    pub tie_output: bool,

    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub val_every: usize,
    pub min_frequency: usize,

    pub lambda_ce: f64,
    pub lambda_tr: f64,
    pub gamma: f64,

    pub roc_scoring: RocScoring,

    pub dictionary: Option<PathBuf>,
    pub relations: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = ModelConfig::desk(0);
        let w = LossWeights::default();
        Self {
            seed: 0,
            preset: "desk".into(),
            d_model: None,
            heads: None,
            encoder_layers: None,
            decoder_layers: None,
            d_ff: None,
            graph_slots: m.graph_slots,
            max_t: m.max_t,
            pe_base: m.pe_base,
            norm: m.norm,
            max_report_len: m.max_report_len,
            tie_output: m.tie_output,
            lr: 1e-4,
            epochs: 50,
            batch_size: 8,
            val_every: 1,
            min_frequency: DEFAULT_MIN_FREQUENCY,
            lambda_ce: w.lambda_ce,
            lambda_tr: w.lambda_tr,
            gamma: w.gamma,
            roc_scoring: RocScoring::Energy,
            dictionary: None,
            relations: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, TrainError> {
        toml::from_str(text).map_err(|e| TrainError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Apply `key=value`, with the value parsed as a TOML literal and falling
    /// back to a plain string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), TrainError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| TrainError::Config(format!("override `{assignment}` is not key=value")))?;
        let key = key.trim();
        let raw = raw.trim();
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let mut table = toml::Table::try_from(&*self).map_err(|e| TrainError::Config(e.to_string()))?;
        let known = table.contains_key(key) || Self::optional_keys().contains(&key);
        if !known {
            return Err(TrainError::Config(format!("unknown config key `{key}`")));
        }
        // integers given for float fields are widened
        let value = match (table.get(key), value) {
            (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
            (_, v) => v,
        };
        table.insert(key.to_string(), value);
        *self = table.try_into().map_err(|e: toml::de::Error| TrainError::Config(format!("{key}: {e}")))?;
        Ok(())
    }

    fn optional_keys() -> &'static [&'static str] {
        &["d_model", "heads", "encoder_layers", "decoder_layers", "d_ff", "dictionary", "relations"]
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights { lambda_ce: self.lambda_ce, lambda_tr: self.lambda_tr, gamma: self.gamma }
    }

    pub fn model_config(&self, vocab_size: usize) -> Result<ModelConfig, TrainError> {
        let mut m = ModelConfig::preset(&self.preset, vocab_size)
            .ok_or_else(|| TrainError::Config(format!("unknown preset `{}`", self.preset)))?;
        if let Some(v) = self.d_model {
            m.d_model = v;
            if self.d_ff.is_none() {
                m.d_ff = 4 * v;
            }
        }
        m.heads = self.heads.unwrap_or(m.heads);
        m.encoder_layers = self.encoder_layers.unwrap_or(m.encoder_layers);
        m.decoder_layers = self.decoder_layers.unwrap_or(m.decoder_layers);
        m.d_ff = self.d_ff.unwrap_or(m.d_ff);
        m.graph_slots = self.graph_slots;
        m.max_t = self.max_t;
        m.pe_base = self.pe_base;
        m.norm = self.norm;
        m.max_report_len = self.max_report_len;
        m.tie_output = self.tie_output;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(TrainError::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 || self.val_every == 0 || self.min_frequency == 0 {
            return Err(TrainError::Config("batch_size, val_every and min_frequency must be positive".into()));
        }
        self.loss_weights().validate()?;
        for p in [&self.dictionary, &self.relations].into_iter().flatten() {
            if !p.exists() {
                return Err(TrainError::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// The built-in extractor, with the dictionary or relation lexicon
    /// replaced by the configured files.
    pub fn extractor(&self) -> Result<Extractor, TrainError> {
        let dictionary = match &self.dictionary {
            Some(p) => Dictionary::parse(&std::fs::read_to_string(p)?),
            None => Dictionary::builtin(),
        };
        let relations = match &self.relations {
            Some(p) => RelationLexicon::parse(&std::fs::read_to_string(p)?),
            None => RelationLexicon::builtin(),
        };
        Ok(Extractor::new(dictionary, relations))
    }
}
