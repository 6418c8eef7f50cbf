//! Shared token vocabulary for reports and graph triples.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::extract::tokenize;

pub const PAD: usize = 0;
pub const SOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const NUM_SPECIAL: usize = 4;
pub const SPECIALS: [&str; NUM_SPECIAL] = ["[PAD]", "[SOS]", "[EOS]", "[UNK]"];
pub const DEFAULT_MIN_FREQUENCY: usize = 3;

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("vocabulary file line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    min_frequency: usize,
}

/// Word-level tokens used for vocabulary, encoding and metrics.
pub fn words(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.surface).collect()
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>, min_frequency: usize) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index, min_frequency }
    }

    /// Count words over the corpus; keep those seen at least `min_frequency`
    /// times, ordered by frequency descending then lexicographically.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, min_frequency: usize) -> Result<Self, VocabError> {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        let mut any = false;
        for text in texts {
            any = true;
            for w in words(text) {
                *counts.entry(w).or_default() += 1;
            }
        }
        if !any || counts.is_empty() {
            return Err(VocabError::EmptyCorpus);
        }
        let mut kept: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(w, c)| *c >= min_frequency && !SPECIALS.contains(&w.as_str()))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        tokens.extend(kept.into_iter().map(|(w, _)| w));
        Ok(Self::from_tokens(tokens, min_frequency))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn min_frequency(&self) -> usize {
        self.min_frequency
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Id of a non-special token.
    pub fn content_id(&self, word: &str) -> Option<usize> {
        self.id(word).filter(|&i| i >= NUM_SPECIAL)
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map_or(SPECIALS[UNK], String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        words(text).iter().map(|w| self.id(w).unwrap_or(UNK)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<&str> {
        ids.iter().map(|&i| self.token(i)).collect()
    }

    /// Space-joined words, with special tokens skipped.
    pub fn decode_text(&self, ids: &[usize]) -> String {
        ids.iter()
            .filter(|&&i| i >= NUM_SPECIAL)
            .map(|&i| self.token(i))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// SHA-256 over the ordered token list.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// One token per line; the line number is the id.
    pub fn write(&self, mut w: impl Write) -> std::io::Result<()> {
        for t in &self.tokens {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn read(r: impl BufRead, min_frequency: usize) -> Result<Self, VocabError> {
        let mut tokens = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if i < NUM_SPECIAL && line != SPECIALS[i] {
                return Err(VocabError::Format { line: i + 1, msg: format!("expected {}", SPECIALS[i]) });
            }
            if line.is_empty() || line != line.to_lowercase() && i >= NUM_SPECIAL {
                return Err(VocabError::Format { line: i + 1, msg: "tokens must be non-empty and lowercase".into() });
            }
            tokens.push(line);
        }
        if tokens.len() < NUM_SPECIAL {
            return Err(VocabError::Format { line: tokens.len() + 1, msg: "missing special tokens".into() });
        }
        let v = Self::from_tokens(tokens, min_frequency);
        if v.index.len() != v.tokens.len() {
            return Err(VocabError::Format { line: 0, msg: "duplicate token".into() });
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_and_order() {
        let v = Vocabulary::build(["macular macular b b b a a a c c c c"], 3).unwrap();
        assert_eq!(&v.tokens()[..4], &SPECIALS);
        assert_eq!(v.decode(&[4, 5, 6]), ["c", "a", "b"]);
        assert_eq!(v.encode("macular"), [UNK]);
    }

    #[test]
    fn round_trip() {
        let v = Vocabulary::build(["the cat sat on the mat ."], 1).unwrap();
        let ids = v.encode("the mat sat .");
        assert_eq!(v.encode(&v.decode(&ids).join(" ")), ids);
        let mut buf = Vec::new();
        v.write(&mut buf).unwrap();
        assert_eq!(Vocabulary::read(&buf[..], 1).unwrap(), v);
    }

    #[test]
    fn empty_corpus_is_error() {
        assert!(matches!(Vocabulary::build(Vec::<&str>::new(), 3), Err(VocabError::EmptyCorpus)));
        assert!(matches!(Vocabulary::build([""], 3), Err(VocabError::EmptyCorpus)));
    }
}
