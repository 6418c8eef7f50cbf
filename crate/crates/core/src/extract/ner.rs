use super::tokenize::{PosTag, Token};

/// User dictionary of single- and multi-word terms.
#[derive(Debug, Clone, Default)]
pub struct Dictionary {
    terms: Vec<Vec<String>>,
}

impl Dictionary {
    /// One term per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        let mut d = Self::default();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            d.insert(line);
        }
        d
    }

    pub fn builtin() -> Self {
        Self::parse(include_str!("../../resources/user_dictionary.txt"))
    }

    pub fn insert(&mut self, term: &str) {
        let words: Vec<String> = term.split_whitespace().map(str::to_lowercase).collect();
        if !words.is_empty() && !self.terms.contains(&words) {
            self.terms.push(words);
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn contains_word(&self, word: &str) -> bool {
        self.terms.iter().any(|t| t.len() == 1 && t[0] == word)
    }

    /// Longest term matching at `tokens[at..]`, as its word list.
    fn longest_at<'a>(&'a self, tokens: &[Token], at: usize) -> Option<&'a [String]> {
        let mut best: Option<&[String]> = None;
        for term in &self.terms {
            if at + term.len() > tokens.len() || best.is_some_and(|b| b.len() >= term.len()) {
                continue;
            }
            let hit = term
                .iter()
                .zip(&tokens[at..])
                .all(|(w, t)| *w == t.lemma || *w == t.surface);
            if hit {
                best = Some(term);
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mention {
    /// Token range within the sentence.
    pub start: usize,
    pub end: usize,
    /// Canonical form of the head (last) word.
    pub head: String,
    /// Surface form of the head token, used when the canonical form is out of vocabulary.
    pub head_surface: String,
}

/// Leftmost-longest dictionary matching, then uncovered NOUN tokens.
pub fn recognize_entities(sentence: &[Token], dictionary: &Dictionary) -> Vec<Mention> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < sentence.len() {
        if let Some(term) = dictionary.longest_at(sentence, i) {
            let end = i + term.len();
            out.push(Mention {
                start: i,
                end,
                head: term[term.len() - 1].clone(),
                head_surface: sentence[end - 1].surface.clone(),
            });
            i = end;
        } else {
            let t = &sentence[i];
            if t.pos == PosTag::Noun {
                out.push(Mention { start: i, end: i + 1, head: t.lemma.clone(), head_surface: t.surface.clone() });
            }
            i += 1;
        }
    }
    out
}
