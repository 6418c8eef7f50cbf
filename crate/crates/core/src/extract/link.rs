use std::collections::BTreeSet;

use log::debug;

use super::ner::Mention;
use super::tokenize::Token;

/// Lemmatized words that act as relations.
#[derive(Debug, Clone, Default)]
pub struct RelationLexicon {
    words: BTreeSet<String>,
}

impl RelationLexicon {
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self { words }
    }

    pub fn builtin() -> Self {
        Self::parse(include_str!("../../resources/relation_lexicon.txt"))
    }

    pub fn insert(&mut self, word: &str) {
        self.words.insert(word.to_lowercase());
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Canonical relation form for a token, if it is a relation word.
    pub fn match_token(&self, t: &Token) -> Option<&str> {
        self.words
            .get(&t.lemma)
            .or_else(|| self.words.get(&t.surface))
            .map(String::as_str)
    }
}

/// A triple over canonical word forms, with the surface fallbacks kept alongside.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WordTriple {
    pub subject: (String, String),
    pub relation: (String, String),
    pub object: (String, String),
}

impl WordTriple {
    pub fn canonical(&self) -> (&str, &str, &str) {
        (&self.subject.0, &self.relation.0, &self.object.0)
    }
}

fn paren_depths(sentence: &[Token]) -> Vec<usize> {
    let mut depth = 0usize;
    sentence
        .iter()
        .map(|t| match t.surface.as_str() {
            "(" | "（" => {
                depth += 1;
                depth
            }
            ")" | "）" => {
                let d = depth;
                depth = depth.saturating_sub(1);
                d
            }
            _ => depth,
        })
        .collect()
}

/// Mentions inside the parenthetical group that directly follows `subject`.
fn hedges<'m>(sentence: &[Token], mentions: &'m [Mention], subject: &Mention) -> Vec<&'m Mention> {
    let open = subject.end;
    if !sentence.get(open).is_some_and(|t| matches!(t.surface.as_str(), "(" | "（")) {
        return Vec::new();
    }
    let close = sentence[open + 1..]
        .iter()
        .position(|t| matches!(t.surface.as_str(), ")" | "）"))
        .map_or(sentence.len(), |p| open + 1 + p);
    mentions.iter().filter(|m| m.start > open && m.end <= close).collect()
}

/// Nearest-entity linking within one sentence.
pub fn link_entities(sentence: &[Token], mentions: &[Mention], lexicon: &RelationLexicon) -> Vec<WordTriple> {
    let depth = paren_depths(sentence);
    let bare: Vec<&Mention> = mentions.iter().filter(|m| depth[m.start] == 0).collect();
    let covered = |i: usize| mentions.iter().any(|m| (m.start..m.end).contains(&i));
    let mut out = Vec::new();
    for (i, tok) in sentence.iter().enumerate() {
        if covered(i) || depth[i] > 0 {
            continue;
        }
        let Some(rel) = lexicon.match_token(tok) else { continue };
        let subject = bare.iter().rev().find(|m| m.end <= i);
        let object = bare.iter().find(|m| m.start > i);
        let (Some(subject), Some(object)) = (subject, object) else {
            debug!("relation `{rel}` without an entity on both sides");
            continue;
        };
        let relation = (rel.to_string(), tok.surface.clone());
        let object_pair = (object.head.clone(), object.head_surface.clone());
        let mut subjects = vec![*subject];
        subjects.extend(hedges(sentence, mentions, subject));
        for s in subjects {
            if s.head == object.head {
                continue;
            }
            out.push(WordTriple {
                subject: (s.head.clone(), s.head_surface.clone()),
                relation: relation.clone(),
                object: object_pair.clone(),
            });
        }
    }
    out
}
