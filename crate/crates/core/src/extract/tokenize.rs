use serde::{Deserialize, Serialize};

/// Closed part-of-speech tag set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PosTag {
    Noun,
    Verb,
    Adj,
    Adp,
    Det,
    Punct,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Lowercased surface form.
    pub surface: String,
    pub lemma: String,
    pub pos: PosTag,
    /// Byte offsets into the source text.
    pub char_span: (usize, usize),
}

impl Token {
    fn new(surface: &str, start: usize, end: usize) -> Self {
        let surface = surface.to_lowercase();
        Self { lemma: surface.clone(), surface, pos: PosTag::Other, char_span: (start, end) }
    }

    pub fn is_punct(&self) -> bool {
        self.pos == PosTag::Punct
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Split text into lowercased word-level tokens. Punctuation marks become
/// single-character tokens; hyphens and apostrophes stay inside a word when
/// flanked by word characters, as does a decimal point between digits.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if !is_word_char(c) {
            let end = start + c.len_utf8();
            out.push(Token::new(&text[start..end], start, end));
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() {
            let cj = chars[j].1;
            if is_word_char(cj) {
                j += 1;
                continue;
            }
            let joiner = matches!(cj, '-' | '\'' | '’') || (cj == '.' && chars[j - 1].1.is_ascii_digit());
            let next_ok = chars.get(j + 1).is_some_and(|&(_, n)| {
                if cj == '.' {
                    n.is_ascii_digit()
                } else {
                    is_word_char(n)
                }
            });
            if joiner && next_ok {
                j += 2;
            } else {
                break;
            }
        }
        let end = chars.get(j).map_or(text.len(), |&(p, _)| p);
        out.push(Token::new(&text[start..end], start, end));
        i = j;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(text: &str) -> Vec<String> {
        tokenize(text).into_iter().map(|t| t.surface).collect()
    }

    #[test]
    fn example_sentence() {
        assert_eq!(
            surfaces("Spotted obscured fluorescence (hemorrhage?)"),
            ["spotted", "obscured", "fluorescence", "(", "hemorrhage", "?", ")"]
        );
    }

    #[test]
    fn empty_and_trailing_period() {
        assert!(tokenize("").is_empty());
        assert_eq!(surfaces("macular arch ring."), ["macular", "arch", "ring", "."]);
    }

    #[test]
    fn joiners_and_spans() {
        assert_eq!(surfaces("left-eye 1.5 dd; ok"), ["left-eye", "1.5", "dd", ";", "ok"]);
        let text = "Laser spot。";
        for t in tokenize(text) {
            assert!(t.char_span.1 <= text.len());
            assert_eq!(text[t.char_span.0..t.char_span.1].to_lowercase(), t.surface);
        }
        assert_eq!(surfaces(text).last().unwrap(), "。");
    }
}
