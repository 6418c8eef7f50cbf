use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use super::{Evaluation, Prepared, RunConfig, TrainError, Trainer};
use crate::extract::io::write_graph_tsv;
use crate::metrics::write_roc_csv;
use crate::model::{CgtModel, ModelConfig};
use crate::tensor::checkpoint::{read_tensors, write_tensors};

pub const CHECKPOINT: &str = "checkpoint.bin";
pub const STATE: &str = "state.bin";
pub const MANIFEST: &str = "manifest.json";

/// Provenance of a trained run: what it was trained on and with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub vocab_hash: String,
    pub vocab_size: usize,
    pub graph_hash: String,
    pub graph_triples: usize,
    pub train_ids_hash: String,
    pub train_cases: usize,
    pub config: RunConfig,
    pub model: ModelConfig,
}

impl Manifest {
    pub fn new(data: &Prepared, config: &RunConfig, model: &ModelConfig) -> Self {
        Self {
            vocab_hash: data.vocab.hash(),
            vocab_size: data.vocab.len(),
            graph_hash: data.graph_hash(),
            graph_triples: data.graph.len(),
            train_ids_hash: data.train_ids_hash(),
            train_cases: data.split_indices(crate::data::Split::Train).len(),
            config: config.clone(),
            model: model.clone(),
        }
    }

    /// Error unless `data` has the vocabulary this run was trained with.
    pub fn check_vocab(&self, data: &Prepared) -> Result<(), TrainError> {
        let found = data.vocab.hash();
        if found != self.vocab_hash {
            return Err(TrainError::VocabMismatch { expected: self.vocab_hash.clone(), found });
        }
        Ok(())
    }
}

/// Write every parameter and buffer of `model`.
pub fn save_checkpoint(path: &Path, model: &CgtModel) -> Result<(), TrainError> {
    let p = &model.params;
    let records: Vec<_> = p.ids().map(|id| (p.name(id).to_string(), p.get(id).clone())).collect();
    write_atomic(path, |w| Ok(write_tensors(w, &records)?))
}

/// Load a checkpoint into a model of the given shape; every parameter must
/// be present with its expected shape.
pub fn load_checkpoint(path: &Path, config: ModelConfig) -> Result<CgtModel, TrainError> {
    let records = read_tensors(BufReader::new(File::open(path)?))?;
    let mut model = CgtModel::new(config, 0)?;
    if records.len() != model.params.len() {
        return Err(TrainError::Checkpoint(format!(
            "checkpoint holds {} tensors, the model has {}",
            records.len(),
            model.params.len()
        )));
    }
    for (name, t) in records {
        let id = model.params.id(&name)?;
        model.params.set(id, t)?;
    }
    Ok(model)
}

/// Write through a temporary file so a failed write never leaves a partial file.
fn write_atomic(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<(), TrainError>) -> Result<(), TrainError> {
    let tmp = path.with_extension("tmp");
    let mut w = BufWriter::new(File::create(&tmp)?);
    let res = body(&mut w).and_then(|_| Ok(w.flush()?));
    drop(w);
    match res {
        Ok(()) => Ok(fs::rename(&tmp, path)?),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

/// Output directory of one training run.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    pub fn create(path: impl Into<PathBuf>) -> Result<Self, TrainError> {
        let path = path.into();
        fs::create_dir_all(&path)?;
        Ok(Self { path })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn read_manifest(&self) -> Result<Manifest, TrainError> {
        let text = fs::read_to_string(self.file(MANIFEST))?;
        serde_json::from_str(&text).map_err(|e| TrainError::Checkpoint(format!("{MANIFEST}: {e}")))
    }

    /// Vocabulary, graph, config and manifest, written before training starts.
    pub fn write_inputs(&self, data: &Prepared, trainer: &Trainer) -> Result<Manifest, TrainError> {
        let manifest = Manifest::new(data, &trainer.config, &trainer.model.config);
        write_atomic(&self.file("vocab.txt"), |w| Ok(data.vocab.write(w)?))?;
        write_atomic(&self.file("graph.tsv"), |w| Ok(write_graph_tsv(w, &data.graph, &data.vocab)?))?;
        fs::write(self.file("config.toml"), trainer.config.to_toml())?;
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(self.file(MANIFEST), json + "\n")?;
        Ok(manifest)
    }

    /// Loss curve, resumable state and the selected checkpoint.
    pub fn write_progress(&self, trainer: &Trainer) -> Result<(), TrainError> {
        write_atomic(&self.file("losses.csv"), |w| {
            writeln!(w, "epoch,ce,tr,total,val_cider")?;
            for h in &trainer.history {
                let val = h.val_cider.map(|c| c.to_string()).unwrap_or_default();
                writeln!(w, "{},{},{},{},{}", h.epoch, h.ce, h.tr, h.total, val)?;
            }
            Ok(())
        })?;
        write_atomic(&self.file(STATE), |w| Ok(write_tensors(w, &trainer.state_records())?))?;
        save_checkpoint(&self.file(CHECKPOINT), &trainer.best_model())
    }

    /// The trainer saved in this directory, if any.
    pub fn load_state(&self, config: RunConfig, vocab_size: usize) -> Result<Option<Trainer>, TrainError> {
        let path = self.file(STATE);
        if !path.exists() {
            return Ok(None);
        }
        let records = read_tensors(BufReader::new(File::open(path)?))?;
        Ok(Some(Trainer::from_state(config, vocab_size, records)?))
    }

    /// Train (or continue a saved run) to the configured epoch count,
    /// writing progress after every epoch.
    pub fn train(&self, data: &Prepared, config: RunConfig, resume: bool) -> Result<Trainer, TrainError> {
        let mut trainer = match resume {
            true => match self.load_state(config.clone(), data.vocab.len())? {
                Some(t) => {
                    let manifest = self.read_manifest()?;
                    manifest.check_vocab(data)?;
                    info!("resuming from epoch {}", t.epoch);
                    t
                }
                None => Trainer::new(config, data.vocab.len())?,
            },
            false => Trainer::new(config, data.vocab.len())?,
        };
        self.write_inputs(data, &trainer)?;
        trainer.fit(data, |t| self.write_progress(t))?;
        if trainer.history.is_empty() {
            self.write_progress(&trainer)?;
        }
        Ok(trainer)
    }

    /// The selected model, after checking that `data` matches the run.
    pub fn load_model(&self, data: &Prepared) -> Result<CgtModel, TrainError> {
        let manifest = self.read_manifest()?;
        manifest.check_vocab(data)?;
        load_checkpoint(&self.file(CHECKPOINT), manifest.model)
    }
}

/// `metrics.json`, `roc.csv` and `generations.jsonl` under `dir`.
pub fn write_evaluation(dir: &Path, eval: &Evaluation) -> Result<(), TrainError> {
    fs::create_dir_all(dir)?;
    let mut metrics = serde_json::to_value(&eval.scores).expect("scores serialize");
    let obj = metrics.as_object_mut().expect("scores are an object");
    obj.insert("auc".into(), serde_json::json!(eval.auc));
    obj.insert("split".into(), serde_json::json!(eval.split));
    obj.insert("cases".into(), serde_json::json!(eval.cases.len()));
    let text = serde_json::to_string_pretty(&metrics).expect("metrics serialize");
    fs::write(dir.join("metrics.json"), text + "\n")?;
    write_atomic(&dir.join("roc.csv"), |w| Ok(write_roc_csv(w, &eval.roc)?))?;
    write_atomic(&dir.join("generations.jsonl"), |w| {
        for c in &eval.cases {
            writeln!(w, "{}", serde_json::to_string(c).expect("generation serializes"))?;
        }
        Ok(())
    })
}
