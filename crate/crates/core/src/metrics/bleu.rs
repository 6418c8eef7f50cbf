use super::ngram_counts;

/// Clipped n-gram matches and total candidate n-grams over a corpus.
pub fn clipped_precision<S: AsRef<str>>(candidates: &[Vec<S>], references: &[Vec<S>], n: usize) -> (usize, usize) {
    let mut matched = 0;
    let mut total = 0;
    for (c, r) in candidates.iter().zip(references) {
        let rc = ngram_counts(r, n);
        for (g, k) in ngram_counts(c, n) {
            matched += k.min(rc.get(&g).copied().unwrap_or(0));
            total += k;
        }
    }
    (matched, total)
}

/// Corpus BLEU up to order `n`: geometric mean of clipped precisions times
/// the brevity penalty, without smoothing.
pub fn bleu<S: AsRef<str>>(candidates: &[Vec<S>], references: &[Vec<S>], n: usize) -> f64 {
    assert_eq!(candidates.len(), references.len(), "one reference per candidate");
    let c: usize = candidates.iter().map(Vec::len).sum();
    let r: usize = references.iter().map(Vec::len).sum();
    if c == 0 || n == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for k in 1..=n {
        let (m, t) = clipped_precision(candidates, references, k);
        if m == 0 || t == 0 {
            return 0.0;
        }
        log_sum += (m as f64 / t as f64).ln();
    }
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    bp * (log_sum / n as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(t: &str) -> Vec<String> {
        t.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn examples() {
        let a = vec![s("the cat sat on the mat")];
        assert!((bleu(&a, &a, 4) - 1.0).abs() < 1e-15);
        assert_eq!(clipped_precision(&[s("the the the")], &[s("the cat")], 1), (1, 3));
        assert_eq!(bleu(&[s("")], &[s("a b")], 1), 0.0);
    }
}
