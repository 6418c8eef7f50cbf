use std::collections::BTreeMap;

use log::warn;

use super::ngram_counts;

const MAX_N: usize = 4;
const SCALE: f64 = 10.0;

fn cosine(a: &BTreeMap<Vec<&str>, f64>, b: &BTreeMap<Vec<&str>, f64>) -> f64 {
    let dot: f64 = a.iter().map(|(g, x)| x * b.get(g).copied().unwrap_or(0.0)).sum();
    let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn tfidf<'a>(counts: &BTreeMap<Vec<&'a str>, usize>, idf: &dyn Fn(&Vec<&str>) -> f64) -> BTreeMap<Vec<&'a str>, f64> {
    let len: usize = counts.values().sum();
    counts.iter().map(|(g, &c)| (g.clone(), c as f64 / len.max(1) as f64 * idf(g))).collect()
}

/// Corpus CIDEr: per order n = 1..4, cosine similarity of TF-IDF n-gram
/// vectors (document frequencies over the references), averaged over n,
/// times 10, then averaged over cases.
///
/// With fewer than two reference documents the IDF `ln(N/df)` is degenerate;
/// the smoothed form `ln((N+1)/(df+1)) + 1` is used instead.
pub fn cider<S: AsRef<str>>(candidates: &[Vec<S>], references: &[Vec<S>]) -> f64 {
    assert_eq!(candidates.len(), references.len(), "one reference per candidate");
    let docs = references.len();
    if docs == 0 {
        return 0.0;
    }
    let smooth = docs < 2;
    if smooth {
        warn!("CIDEr over a single reference document; using smoothed IDF");
    }
    let mut total = 0.0;
    let mut per_case = vec![0.0; docs];
    for n in 1..=MAX_N {
        let ref_grams: Vec<BTreeMap<Vec<&str>, usize>> = references.iter().map(|r| ngram_counts(r, n)).collect();
        let mut df: BTreeMap<Vec<&str>, usize> = BTreeMap::new();
        for g in &ref_grams {
            for k in g.keys() {
                *df.entry(k.clone()).or_insert(0) += 1;
            }
        }
        let idf = |g: &Vec<&str>| {
            let d = df.get(g).copied().unwrap_or(0) as f64;
            if smooth {
                ((docs as f64 + 1.0) / (d + 1.0)).ln() + 1.0
            } else {
                (docs as f64 / d.max(1.0)).ln()
            }
        };
        for (i, c) in candidates.iter().enumerate() {
            let vc = tfidf(&ngram_counts(c, n), &idf);
            let vr = tfidf(&ref_grams[i], &idf);
            per_case[i] += cosine(&vc, &vr) / MAX_N as f64;
        }
    }
    for s in per_case {
        total += SCALE * s;
    }
    total / docs as f64
}
