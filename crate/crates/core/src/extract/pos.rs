use std::collections::HashMap;

use super::tokenize::{PosTag, Token};

const DETERMINERS: &[&str] = &["the", "a", "an", "this", "that", "these", "those", "both", "each", "no", "some", "any", "all"];
const ADPOSITIONS: &[&str] = &[
    "in", "at", "of", "on", "during", "near", "under", "around", "with", "within", "from", "to", "by", "into", "beyond",
    "along", "over", "above", "below", "inside", "outside", "between", "after", "before", "without", "across", "behind",
];
const VERBS: &[&str] = &[
    "is", "are", "was", "were", "be", "been", "being", "seen", "see", "saw", "showed", "show", "shows", "shown",
    "appeared", "appear", "observed", "noted", "found", "spot", "has", "have", "had", "involving", "surrounding",
    "covering",
];
const NOUNS: &[&str] = &["laser", "staining", "disc", "drusen", "scar", "vessel", "retina", "fovea", "lesion", "edema"];
const ADJECTIVES: &[&str] = &["left", "right", "inferior", "superior", "nasal", "temporal", "small", "large", "visible", "normal"];

const NOUN_SUFFIXES: &[&str] = &["ence", "ance", "tion", "sion", "ment", "ness", "age", "ity", "ism", "ure", "sis", "oma", "itis"];
const ADJ_SUFFIXES: &[&str] = &["al", "ous", "ive", "ic", "ar", "ful", "less", "ible", "able"];
const VERB_SUFFIXES: &[&str] = &["ed", "ing"];

/// Lexicon-first tagger with a suffix-rule fallback.
#[derive(Debug, Clone)]
pub struct PosLexicon {
    entries: HashMap<String, PosTag>,
}

impl Default for PosLexicon {
    fn default() -> Self {
        let mut entries = HashMap::new();
        for (words, tag) in [
            (DETERMINERS, PosTag::Det),
            (ADPOSITIONS, PosTag::Adp),
            (VERBS, PosTag::Verb),
            (NOUNS, PosTag::Noun),
            (ADJECTIVES, PosTag::Adj),
        ] {
            for w in words {
                entries.insert((*w).to_string(), tag);
            }
        }
        Self { entries }
    }
}

impl PosLexicon {
    pub fn insert(&mut self, word: &str, tag: PosTag) {
        self.entries.insert(word.to_lowercase(), tag);
    }

    pub fn tag_word(&self, word: &str) -> PosTag {
        if let Some(&t) = self.entries.get(word) {
            return t;
        }
        let mut chars = word.chars();
        match chars.next() {
            None => return PosTag::Other,
            Some(c) if !c.is_alphanumeric() => return PosTag::Punct,
            _ => {}
        }
        // suffix rules need a stem of at least three characters
        let fits = |suffix: &str| word.len() >= suffix.len() + 3 && word.ends_with(suffix);
        if NOUN_SUFFIXES.iter().any(|s| fits(s)) {
            PosTag::Noun
        } else if VERB_SUFFIXES.iter().any(|s| fits(s)) {
            PosTag::Verb
        } else if ADJ_SUFFIXES.iter().any(|s| fits(s)) {
            PosTag::Adj
        } else {
            PosTag::Other
        }
    }
}

pub fn pos_tag(tokens: &mut [Token], lexicon: &PosLexicon) {
    for t in tokens {
        t.pos = lexicon.tag_word(&t.surface);
    }
}
