use cgt_core::metrics::{auc, auc_rank, bleu, cider, meteor_simplified, roc_micro, rouge_l, NlgScores};
use proptest::prelude::*;

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

#[test]
fn rouge_l_hand_case() {
    // LCS "a c" of length 2; P = 2/3, R = 2/4, β = 1.2
    let (p, r, b2) = (2.0 / 3.0, 0.5, 1.44);
    let want = (1.0 + b2) * p * r / (r + b2 * p);
    assert!((rouge_l(&words("a x c"), &words("a b c d")) - want).abs() < 1e-12);
}

#[test]
fn meteor_bounds_and_identity() {
    let r = words("hemorrhage seen in the macular area");
    assert!(meteor_simplified(&r, &r) > 0.99);
    assert_eq!(meteor_simplified(&words("x y"), &r), 0.0);
}

#[test]
fn cider_hand_case() {
    let cands = vec![words("a b"), words("a"), words("x")];
    let refs = vec![words("a b"), words("a c"), words("d e")];
    let (l15, l3) = (1.5f64.ln(), 3.0f64.ln());
    let want = (5.0 + 2.5 * l15 / (l15 * l15 + l3 * l3).sqrt()) / 3.0;
    assert!((cider(&cands, &refs) - want).abs() < 1e-12);
}

#[test]
fn roc_hand_case() {
    let pts = roc_micro(&[0.9, 0.8, 0.3, 0.1], &[true, false, true, false]).unwrap();
    assert_eq!(auc(&pts).unwrap(), 0.75);
    assert!(roc_micro(&[0.1, 0.2], &[true, true]).is_err());
}

fn corpus() -> impl Strategy<Value = (Vec<Vec<String>>, Vec<Vec<String>>)> {
    let sentence = proptest::collection::vec(prop_oneof!["a", "b", "c", "d"], 1..10);
    (1usize..6).prop_flat_map(move |n| {
        (proptest::collection::vec(sentence.clone(), n), proptest::collection::vec(sentence.clone(), n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scores_are_bounded_and_order_invariant((cands, refs) in corpus()) {
        let s = NlgScores::compute(&cands, &refs);
        for v in [s.bleu_1, s.bleu_2, s.bleu_3, s.bleu_4, s.meteor, s.rouge_l] {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
        }
        prop_assert!(s.cider >= 0.0);
        let rc: Vec<_> = cands.iter().rev().cloned().collect();
        let rr: Vec<_> = refs.iter().rev().cloned().collect();
        let t = NlgScores::compute(&rc, &rr);
        prop_assert_eq!(bleu(&cands, &refs, 4), bleu(&rc, &rr, 4));
        prop_assert!((s.cider - t.cider).abs() < 1e-12);
        prop_assert!((s.rouge_l - t.rouge_l).abs() < 1e-12);
        prop_assert!((s.meteor - t.meteor).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_equals_rank_auc(scores in proptest::collection::vec(0u8..6, 2..40), labels in proptest::collection::vec(any::<bool>(), 40)) {
        let s: Vec<f64> = scores.iter().map(|&v| v as f64).collect();
        let mut l = labels[..s.len()].to_vec();
        l[0] = true;
        l[1] = false;
        let a = auc(&roc_micro(&s, &l).unwrap()).unwrap();
        prop_assert!((a - auc_rank(&s, &l).unwrap()).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&a));
    }
}
