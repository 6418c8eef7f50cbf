use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use log::info;

use super::{sha256_hex, TrainError};
use crate::data::{read_dataset, DatasetCase, Split, SynthCorpus};
use crate::extract::io::write_graph_tsv;
use crate::extract::{build_clinical_graph, ClinicalGraph, Extractor, ReportRef, Triple};
use crate::tensor::Tensor;
use crate::vocab::{words, Vocabulary, EOS};

/// Dataset cases with their feature tensors loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub cases: Vec<DatasetCase>,
    pub features: Vec<Tensor>,
}

impl Corpus {
    /// Read a JSON-lines dataset; feature paths resolve against its directory.
    pub fn load(dataset: &Path) -> Result<Self, TrainError> {
        let cases = read_dataset(BufReader::new(File::open(dataset)?))?;
        let base = dataset.parent().unwrap_or(Path::new("."));
        let features = cases.iter().map(|c| c.load_features(base)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { cases, features })
    }

    pub fn from_synth(corpus: &SynthCorpus) -> Self {
        Self {
            cases: corpus.cases.iter().map(|c| c.case.clone()).collect(),
            features: corpus.cases.iter().map(|c| c.features.clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    /// Only the cases accepted by `keep`, in order.
    pub fn filter(&self, mut keep: impl FnMut(usize, &DatasetCase) -> bool) -> Self {
        let mut out = Self { cases: Vec::new(), features: Vec::new() };
        for (i, (c, f)) in self.cases.iter().zip(&self.features).enumerate() {
            if keep(i, c) {
                out.cases.push(c.clone());
                out.features.push(f.clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedCase {
    pub id: String,
    pub split: Split,
    pub features: Tensor,
    pub report_words: Vec<String>,
    /// Report ids truncated to the length limit, then [EOS].
    pub target: Vec<usize>,
    /// Triples extracted from the report, in report order.
    pub triples: Vec<Triple>,
}

impl PreparedCase {
    /// Teacher-forcing decoder input: [SOS] followed by all but the last target.
    pub fn decoder_input(&self) -> Vec<usize> {
        let mut v = Vec::with_capacity(self.target.len());
        v.push(crate::vocab::SOS);
        v.extend_from_slice(&self.target[..self.target.len() - 1]);
        v
    }
}

/// Everything derived from a corpus before training.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub vocab: Vocabulary,
    pub graph: ClinicalGraph,
    pub extractor: Extractor,
    pub cases: Vec<PreparedCase>,
}

impl Prepared {
    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        (0..self.cases.len()).filter(|&i| self.cases[i].split == split).collect()
    }

    pub fn graph_hash(&self) -> String {
        let mut buf = Vec::new();
        write_graph_tsv(&mut buf, &self.graph, &self.vocab).expect("writing to memory");
        sha256_hex(&buf)
    }

    /// Hash of the ordered train case ids.
    pub fn train_ids_hash(&self) -> String {
        let ids: Vec<&str> = self.cases.iter().filter(|c| c.split == Split::Train).map(|c| c.id.as_str()).collect();
        sha256_hex(ids.join("\n").as_bytes())
    }
}

/// Build the vocabulary and clinical graph from the train split, then encode
/// every case against them.
pub fn prepare(
    corpus: &Corpus,
    extractor: Extractor,
    min_frequency: usize,
    max_report_len: usize,
) -> Result<Prepared, TrainError> {
    let train: Vec<&DatasetCase> = corpus.cases.iter().filter(|c| c.split == Split::Train).collect();
    let vocab = Vocabulary::build(train.iter().map(|c| c.report.as_str()), min_frequency)?;
    let refs: Vec<ReportRef<'_>> =
        train.iter().map(|c| ReportRef { id: &c.id, split: Some(c.split), text: &c.report }).collect();
    let graph = build_clinical_graph(&refs, &extractor, &vocab)?;
    info!(
        "prepared {} cases: {} train, vocabulary {} tokens, graph {} triples",
        corpus.len(),
        train.len(),
        vocab.len(),
        graph.len()
    );

    let mut cases = Vec::with_capacity(corpus.len());
    for (c, f) in corpus.cases.iter().zip(&corpus.features) {
        let report_words = words(&c.report);
        let mut target: Vec<usize> = report_words.iter().take(max_report_len).map(|w| vocab.id(w).unwrap_or(crate::vocab::UNK)).collect();
        target.push(EOS);
        cases.push(PreparedCase {
            id: c.id.clone(),
            split: c.split,
            features: f.clone(),
            report_words,
            target,
            triples: extractor.report_triples(&c.report, &vocab),
        });
    }
    Ok(Prepared { vocab, graph, extractor, cases })
}
