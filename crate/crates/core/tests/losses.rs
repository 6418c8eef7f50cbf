use cgt_core::extract::{ClinicalGraph, Triple};
use cgt_core::losses::{
    hinge, normalized_table, report_cross_entropy, total_loss, transe_energy, triple_restoration_loss, LossWeights, NegativeSampler,
};
use cgt_core::tensor::{ParamStore, Tape, Tensor};
use proptest::prelude::*;

fn table(v: usize, d: usize, seed: u64) -> Tensor {
    let data = (0..v * d).map(|k| ((k as f64 + seed as f64) * 0.731).sin()).collect();
    normalized_table(&Tensor::new(vec![v, d], data).unwrap())
}

fn one_hot_logits(ids: &[usize], v: usize, scale: f64) -> Tensor {
    let mut t = Tensor::zeros(&[ids.len(), v]);
    for (r, &i) in ids.iter().enumerate() {
        t.data_mut()[r * v + i] = scale;
    }
    t
}

#[test]
fn energy_and_hinge_examples() {
    assert_eq!(transe_energy(&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]), 0.0);
    assert_eq!(transe_energy(&[1.0, 0.0], &[0.0, 0.0], &[0.0, 1.0]), 2.0);
    assert_eq!(hinge(0.0, 2.0, 1.0), 0.0);
    assert_eq!(hinge(1.0, 0.5, 1.0), 1.5);
}

#[test]
fn confident_correct_slots_reach_the_floor() {
    // embeddings with e_s + r = e_o and a corruption whose energy exceeds γ
    let t = Tensor::from_rows(&[
        vec![0.0, 0.0],
        vec![0.0, 0.0],
        vec![0.0, 0.0],
        vec![0.0, 0.0],
        vec![1.0, 0.0],  // 4: subject
        vec![0.0, 1.0],  // 5: relation
        vec![1.0, 1.0],  // 6: object
        vec![-2.0, 0.0], // 7: corrupting object
    ])
    .unwrap();
    let store = ParamStore::new();
    let mut tape = Tape::new(&store);
    let logits = tape.constant(one_hot_logits(&[4, 5, 6], 8, 60.0));
    let gt = [Triple::new(4, 5, 6)];
    let neg = [Some(Triple::new(4, 5, 7))];
    let loss = triple_restoration_loss(&mut tape, logits, &gt, &neg, &t, 1.0).unwrap();
    assert!(tape.value(loss).item() == 0.0);

    // wrong subject: d_pos = 3, d_neg = 4
    let logits = tape.constant(one_hot_logits(&[7, 5, 6], 8, 60.0));
    let loss = triple_restoration_loss(&mut tape, logits, &gt, &neg, &t, 2.0).unwrap();
    assert!((tape.value(loss).item() - 1.0).abs() < 1e-9);
}

#[test]
fn no_triples_contribute_nothing() {
    let store = ParamStore::new();
    let mut tape = Tape::new(&store);
    let logits = tape.constant(Tensor::zeros(&[6, 10]));
    let loss = triple_restoration_loss(&mut tape, logits, &[], &[], &table(10, 4, 0), 1.0).unwrap();
    assert_eq!(tape.value(loss).item(), 0.0);
    assert!(triple_restoration_loss(&mut tape, logits, &[Triple::new(4, 5, 6)], &[], &table(10, 4, 0), 1.0).is_err());
}

#[test]
fn cross_entropy_checks() {
    let store = ParamStore::new();
    let mut tape = Tape::new(&store);
    let uniform = tape.constant(Tensor::zeros(&[3, 3245]));
    let ce = report_cross_entropy(&mut tape, uniform, &[5, 6, 2]).unwrap();
    assert!((tape.value(ce).item() - 3245f64.ln()).abs() < 1e-9);
    let sharp = tape.constant(one_hot_logits(&[5, 6, 2], 10, 50.0));
    let ce = report_cross_entropy(&mut tape, sharp, &[5, 6, 2]).unwrap();
    assert!(tape.value(ce).item() < 1e-15);
    assert!(report_cross_entropy(&mut tape, sharp, &[5, 6]).is_err());
}

#[test]
fn total_loss_rejects_non_finite_branches() {
    let store = ParamStore::new();
    let mut tape = Tape::new(&store);
    let ce = tape.constant(Tensor::scalar(f64::NAN));
    let tr = tape.constant(Tensor::scalar(1.0));
    let err = total_loss(&mut tape, ce, tr, &LossWeights::default()).unwrap_err();
    assert!(err.to_string().contains("cross-entropy"));
    let ce = tape.constant(Tensor::scalar(2.0));
    let tr = tape.constant(Tensor::scalar(3.0));
    let t = total_loss(&mut tape, ce, tr, &LossWeights::default()).unwrap();
    assert_eq!(tape.value(t).item(), 5.0);
    assert!(LossWeights { gamma: 0.0, ..LossWeights::default() }.validate().is_err());
}

#[test]
fn tiny_graph_corruptions() {
    let mut g = ClinicalGraph::new();
    g.add(Triple::new(4, 10, 5), None);
    g.add(Triple::new(5, 10, 6), None);
    let mut s = NegativeSampler::new(&g, 3);
    for _ in 0..200 {
        for t in g.triples().to_vec() {
            let c = s.corrupt(&t).expect("a corruption exists");
            assert!(!g.contains(&c) && c.relation == t.relation && c.subject != c.object);
        }
    }
    let draw = |seed| {
        let mut s = NegativeSampler::new(&g, seed);
        (0..20).map(|_| s.corrupt(&g.triples()[0])).collect::<Vec<_>>()
    };
    assert_eq!(draw(9), draw(9));

    // two entities: every replacement is either the triple itself or a self-loop
    let mut g2 = ClinicalGraph::new();
    g2.add(Triple::new(4, 10, 5), None);
    g2.add(Triple::new(5, 10, 4), None);
    assert_eq!(NegativeSampler::new(&g2, 0).corrupt(&Triple::new(4, 10, 5)), None);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn restoration_loss_is_non_negative(logits in proptest::collection::vec(-4.0f64..4.0, 60), gamma in 0.01f64..3.0) {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let l = tape.constant(Tensor::new(vec![6, 10], logits).unwrap());
        let gt = [Triple::new(4, 5, 6), Triple::new(7, 5, 8)];
        let neg = [Some(Triple::new(9, 5, 6)), Some(Triple::new(7, 5, 4))];
        let loss = triple_restoration_loss(&mut tape, l, &gt, &neg, &table(10, 6, 1), gamma).unwrap();
        prop_assert!(tape.value(loss).item() >= 0.0);
    }

    #[test]
    fn total_loss_is_linear_in_each_weight(ce in 0.0f64..10.0, tr in 0.0f64..10.0, a in 0.0f64..4.0, b in 0.0f64..4.0) {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let c = tape.constant(Tensor::scalar(ce));
        let t = tape.constant(Tensor::scalar(tr));
        let w = LossWeights { lambda_ce: a, lambda_tr: b, gamma: 1.0 };
        let v = total_loss(&mut tape, c, t, &w).unwrap();
        prop_assert!((tape.value(v).item() - (a * ce + b * tr)).abs() < 1e-12);
    }
}
