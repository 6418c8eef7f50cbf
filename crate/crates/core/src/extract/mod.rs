//! Rule-based extraction of (subject, relation, object) triples from report
//! text: tokenize, tag, lemmatize, split sentences, recognize entities, link,
//! and merge into a deduplicated graph.

mod graph;
pub mod io;
mod lemma;
mod link;
mod ner;
mod pos;
mod sentence;
mod tokenize;

use log::warn;
use thiserror::Error;

use crate::data::Split;
use crate::vocab::Vocabulary;

pub use graph::{graph_stats, ClinicalGraph, GraphStats, Provenance, TokenId, Triple};
pub use lemma::{lemma_of, lemmatize};
pub use link::{link_entities, RelationLexicon, WordTriple};
pub use ner::{recognize_entities, Dictionary, Mention};
pub use pos::{pos_tag, PosLexicon};
pub use sentence::{is_boundary, split_sentences};
pub use tokenize::{tokenize, PosTag, Token};

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("report `{id}` belongs to the {split} split; the graph is built from training reports only")]
    Leakage { id: String, split: Split },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One report fed to graph construction.
#[derive(Debug, Clone, Copy)]
pub struct ReportRef<'a> {
    pub id: &'a str,
    pub split: Option<Split>,
    pub text: &'a str,
}

/// A triple found in a specific sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceTriple {
    pub sentence: usize,
    pub triple: WordTriple,
}

#[derive(Debug, Clone)]
pub struct Extractor {
    pub dictionary: Dictionary,
    pub relations: RelationLexicon,
    pub lexicon: PosLexicon,
}

impl Default for Extractor {
    fn default() -> Self {
        Self::new(Dictionary::builtin(), RelationLexicon::builtin())
    }
}

impl Extractor {
    pub fn new(dictionary: Dictionary, relations: RelationLexicon) -> Self {
        Self { dictionary, relations, lexicon: PosLexicon::default() }
    }

    /// Tokenize, tag and lemmatize.
    pub fn analyze(&self, text: &str) -> Vec<Token> {
        let mut tokens = tokenize(text);
        pos_tag(&mut tokens, &self.lexicon);
        lemmatize(&mut tokens);
        tokens
    }

    pub fn extract_text(&self, text: &str) -> Vec<SentenceTriple> {
        let tokens = self.analyze(text);
        let mut out = Vec::new();
        for (sentence, range) in split_sentences(&tokens).into_iter().enumerate() {
            let toks = &tokens[range];
            let mentions = recognize_entities(toks, &self.dictionary);
            for triple in link_entities(toks, &mentions, &self.relations) {
                out.push(SentenceTriple { sentence, triple });
            }
        }
        out
    }

    /// Map a word triple onto vocabulary ids, preferring the canonical form.
    pub fn resolve(&self, t: &WordTriple, vocab: &Vocabulary) -> Option<Triple> {
        let id = |(canon, surface): &(String, String)| vocab.content_id(canon).or_else(|| vocab.content_id(surface));
        let triple = Triple::new(id(&t.subject)?, id(&t.relation)?, id(&t.object)?);
        (triple.subject != triple.object).then_some(triple)
    }

    /// Triples of one report as vocabulary ids, in order of appearance.
    pub fn report_triples(&self, text: &str, vocab: &Vocabulary) -> Vec<Triple> {
        let mut out: Vec<Triple> = Vec::new();
        for st in self.extract_text(text) {
            if let Some(t) = self.resolve(&st.triple, vocab) {
                if !out.contains(&t) {
                    out.push(t);
                }
            }
        }
        out
    }
}

/// Extract every training report and merge into one graph.
pub fn build_clinical_graph(
    reports: &[ReportRef<'_>],
    extractor: &Extractor,
    vocab: &Vocabulary,
) -> Result<ClinicalGraph, ExtractError> {
    if let Some(r) = reports.iter().find(|r| r.split.is_some_and(|s| s != Split::Train)) {
        return Err(ExtractError::Leakage { id: r.id.to_string(), split: r.split.unwrap_or(Split::Train) });
    }
    if reports.is_empty() {
        warn!("empty corpus; the clinical graph is empty");
    }
    let mut graph = ClinicalGraph::new();
    let mut dropped = 0usize;
    for r in reports {
        for st in extractor.extract_text(r.text) {
            match extractor.resolve(&st.triple, vocab) {
                Some(t) => {
                    graph.add(t, Some(Provenance { report_id: r.id.to_string(), sentence: st.sentence }));
                }
                None => dropped += 1,
            }
        }
    }
    if dropped > 0 {
        warn!("{dropped} extracted triples dropped: a token is outside the vocabulary");
    }
    Ok(graph)
}
