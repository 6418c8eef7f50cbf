use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_feature_file, synthesize_features, DataError, Split};
use crate::tensor::Tensor;

/// One case of a JSON-lines dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetCase {
    pub id: String,
    pub split: Split,
    #[serde(alias = "report_text")]
    pub report: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_images: Option<usize>,
}

impl DatasetCase {
    /// Features from `feature_path` (relative to `base`) or `synth_seed`.
    pub fn load_features(&self, base: &Path) -> Result<Tensor, DataError> {
        match (&self.feature_path, self.synth_seed) {
            (Some(p), _) => {
                let f = File::open(base.join(p))?;
                read_feature_file(BufReader::new(f))
            }
            (None, Some(seed)) => Ok(synthesize_features(seed)),
            (None, None) => Err(DataError::Input(format!("case `{}` has no feature source", self.id))),
        }
    }
}

pub fn read_dataset(r: impl BufRead) -> Result<Vec<DatasetCase>, DataError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let case: DatasetCase =
            serde_json::from_str(&line).map_err(|e| DataError::Parse { line: i + 1, msg: e.to_string() })?;
        out.push(case);
    }
    Ok(out)
}

pub fn write_dataset(mut w: impl Write, cases: &[DatasetCase]) -> Result<(), DataError> {
    for c in cases {
        let line = serde_json::to_string(c).map_err(|e| DataError::Input(e.to_string()))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}
