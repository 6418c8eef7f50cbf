use std::ops::Range;

use super::tokenize::Token;

const BOUNDARIES: &[&str] = &[".", ";", "。", "；"];

pub fn is_boundary(t: &Token) -> bool {
    BOUNDARIES.contains(&t.surface.as_str())
}

/// Token ranges of each sentence; the boundary mark closes its sentence.
pub fn split_sentences(tokens: &[Token]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, t) in tokens.iter().enumerate() {
        if is_boundary(t) {
            if i > start {
                out.push(start..i + 1);
            }
            start = i + 1;
        }
    }
    if start < tokens.len() {
        out.push(start..tokens.len());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::tokenize::tokenize;

    #[test]
    fn examples() {
        assert_eq!(split_sentences(&tokenize("a b. c d.")).len(), 2);
        assert_eq!(split_sentences(&tokenize("a b c")), vec![0..3]);
        assert_eq!(split_sentences(&tokenize("a near b; c under d; e over f")).len(), 3);
        assert!(split_sentences(&[]).is_empty());
        assert_eq!(split_sentences(&tokenize("x (y?) z.")).len(), 1);
    }
}
