use log::warn;

pub const BETA: f64 = 1.2;

pub fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS-based F-measure with recall weighted by `BETA`.
pub fn rouge_l<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> f64 {
    if reference.is_empty() {
        warn!("ROUGE-L against an empty reference is 0");
        return 0.0;
    }
    if candidate.is_empty() {
        return 0.0;
    }
    let l = lcs_len(candidate, reference) as f64;
    if l == 0.0 {
        return 0.0;
    }
    let p = l / candidate.len() as f64;
    let r = l / reference.len() as f64;
    let b2 = BETA * BETA;
    (1.0 + b2) * p * r / (r + b2 * p)
}

pub fn rouge_l_corpus<S: AsRef<str>>(candidates: &[Vec<S>], references: &[Vec<S>]) -> f64 {
    if candidates.is_empty() {
        return 0.0;
    }
    candidates.iter().zip(references).map(|(c, r)| rouge_l(c, r)).sum::<f64>() / candidates.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let a = ["a", "b", "c", "d"];
        assert_eq!(rouge_l(&a, &a), 1.0);
        assert_eq!(rouge_l(&["x", "y"], &a), 0.0);
        assert_eq!(lcs_len(&a, &["a", "c", "b", "d"]), 3);
        // P = R = 3/4 gives F = 3/4 for any beta
        assert!((rouge_l(&a, &["a", "c", "b", "d"]) - 0.75).abs() < 1e-15);
    }
}
