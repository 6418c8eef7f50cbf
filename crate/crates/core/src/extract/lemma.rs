use super::tokenize::{PosTag, Token};

/// Irregular forms. Forms of "be" map to "is".
const EXCEPTIONS: &[(&str, &str)] = &[
    ("was", "is"),
    ("were", "is"),
    ("are", "is"),
    ("been", "is"),
    ("be", "is"),
    ("being", "is"),
    ("has", "have"),
    ("had", "have"),
    ("saw", "see"),
    ("shown", "show"),
    ("found", "find"),
    ("drusen", "drusen"),
];

fn strip_suffix_rules(word: &str, pos: PosTag) -> String {
    let open = matches!(pos, PosTag::Noun | PosTag::Verb | PosTag::Adj);
    if !open {
        return word.to_string();
    }
    if pos == PosTag::Verb {
        for suffix in ["ing", "ed"] {
            if let Some(stem) = word.strip_suffix(suffix) {
                if stem.len() >= 3 {
                    return restore_stem(stem);
                }
            }
        }
    }
    if matches!(pos, PosTag::Noun | PosTag::Verb) {
        if let Some(stem) = word.strip_suffix('s') {
            let keep = ["ss", "us", "is"].iter().any(|e| word.ends_with(e));
            if !keep && stem.len() >= 3 {
                return stem.to_string();
            }
        }
    }
    word.to_string()
}

fn restore_stem(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    if n >= 2 && b[n - 1] == b[n - 2] && !matches!(b[n - 1], b'l' | b's' | b'z') && !b"aeiou".contains(&b[n - 1]) {
        return stem[..n - 1].to_string();
    }
    if ["at", "bl", "iz", "ur"].iter().any(|e| stem.ends_with(e)) {
        return format!("{stem}e");
    }
    stem.to_string()
}

pub fn lemma_of(word: &str, pos: PosTag) -> String {
    let w = word.to_lowercase();
    if let Some((_, l)) = EXCEPTIONS.iter().find(|(f, _)| *f == w) {
        return (*l).to_string();
    }
    strip_suffix_rules(&w, pos)
}

pub fn lemmatize(tokens: &mut [Token]) {
    for t in tokens {
        t.lemma = lemma_of(&t.surface, t.pos);
    }
}
