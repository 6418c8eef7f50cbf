use crate::extract::{lemma_of, PosTag};

const ALPHA_WEIGHT: f64 = 9.0;
const PENALTY_GAMMA: f64 = 0.5;
const PENALTY_BETA: i32 = 3;

fn stem(w: &str) -> String {
    lemma_of(w, PosTag::Verb)
}

/// Align candidate to reference: exact matches first, then stem matches.
/// Each stage scans the candidate left to right and prefers the reference
/// position that continues the previous match's chunk, else the earliest
/// free one. Returns `(candidate index, reference index)` pairs.
fn align<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> Vec<(usize, usize)> {
    let mut cand_used = vec![false; candidate.len()];
    let mut ref_used = vec![false; reference.len()];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let keys: [fn(&str) -> String; 2] = [|w| w.to_string(), stem];
    for key in keys {
        let rk: Vec<String> = reference.iter().map(|w| key(w.as_ref())).collect();
        for (i, w) in candidate.iter().enumerate() {
            if cand_used[i] {
                continue;
            }
            let k = key(w.as_ref());
            let prev = pairs.iter().filter(|p| p.0 + 1 == i).map(|p| p.1 + 1).next();
            let pick = prev
                .filter(|&j| j < reference.len() && !ref_used[j] && rk[j] == k)
                .or_else(|| (0..reference.len()).find(|&j| !ref_used[j] && rk[j] == k));
            if let Some(j) = pick {
                cand_used[i] = true;
                ref_used[j] = true;
                pairs.push((i, j));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Unigram F-mean (recall-weighted 9:1) with a fragmentation penalty
/// `0.5·(chunks/matches)³`; no synonym matching.
pub fn meteor_simplified<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let pairs = align(candidate, reference);
    let m = pairs.len();
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / candidate.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let fmean = (1.0 + ALPHA_WEIGHT) * p * r / (r + ALPHA_WEIGHT * p);
    let chunks = 1 + pairs.windows(2).filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1)).count();
    let penalty = PENALTY_GAMMA * (chunks as f64 / m as f64).powi(PENALTY_BETA);
    fmean * (1.0 - penalty)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_sentence_closed_form() {
        let a = ["the", "vessel", "is", "seen"];
        let want = 1.0 - 0.5 / 64.0;
        assert!((meteor_simplified(&a, &a) - want).abs() < 1e-15);
    }

    #[test]
    fn disjoint_is_zero() {
        assert_eq!(meteor_simplified(&["a"], &["b"]), 0.0);
        assert_eq!(meteor_simplified::<&str>(&[], &["b"]), 0.0);
    }

    #[test]
    fn transposed_pair_breaks_every_chunk() {
        // alignment (0,0) (1,2) (2,1) (3,3): no two neighbours are adjacent in both
        let got = meteor_simplified(&["a", "b", "c", "d"], &["a", "c", "b", "d"]);
        let want = 1.0 - 0.5 * (4.0f64 / 4.0).powi(3);
        assert!((got - want).abs() < 1e-15, "{got}");
    }

    #[test]
    fn stem_matches_count() {
        let got = meteor_simplified(&["vessels", "leaking"], &["vessel", "leaked"]);
        assert!(got > 0.0);
    }
}
