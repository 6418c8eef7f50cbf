use std::rc::Rc;

use cgt_core::model::{build_visible_matrix, discretize_subgraph, CgtModel, Ctx, Mode, ModelConfig, TokenSequence, VisibleMatrix};
use cgt_core::tensor::{Tape, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(seed: u64, shape: &[usize]) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

fn slot_logits(model: &CgtModel, features: &Tensor) -> Tensor {
    let mut tape = Tape::new(&model.params);
    let mut ctx = Ctx::new(&mut tape, Mode::Train);
    let f = ctx.tape.constant(features.clone());
    let out = model.restore_subgraph(&mut ctx, &[f]).unwrap()[0];
    ctx.tape.value(out).clone()
}

#[test]
fn restoration_shape_and_zero_head() {
    let mut model = CgtModel::new(ModelConfig::tiny(50), 1).unwrap();
    let logits = slot_logits(&model, &gaussian(2, &[12, 1024]));
    assert_eq!(logits.shape(), &[84, 50]);

    // zero features and a zero head: every slot equals the output bias
    for name in ["restore.conv.w", "restore.conv.b", "restore.pool.w", "restore.pool.b", "restore.out.w"] {
        let id = model.params.id(name).unwrap();
        let shape = model.params.get(id).shape().to_vec();
        model.params.set(id, Tensor::zeros(&shape)).unwrap();
    }
    let bias = gaussian(3, &[50]);
    let id = model.params.id("restore.out.b").unwrap();
    model.params.set(id, bias.clone()).unwrap();
    let logits = slot_logits(&model, &Tensor::zeros(&[12, 1024]));
    for r in 0..84 {
        assert_eq!(logits.row(r), bias.data());
    }
}

#[test]
fn discretization_skips_specials() {
    let mut t = Tensor::zeros(&[2, 8]);
    t.data_mut()[0] = 9.0; // [PAD] is the largest but excluded
    t.data_mut()[5] = 1.0;
    t.data_mut()[8 + 6] = 2.0;
    t.data_mut()[8 + 7] = 2.0;
    assert_eq!(discretize_subgraph(&t), vec![5, 6]);
}

#[test]
fn padding_is_isolated() {
    let mut c = ModelConfig::tiny(50);
    c.graph_slots = 12;
    let seq = TokenSequence::new(&[7; 12], &c).unwrap();
    assert_eq!(seq.len(), 90);
    let m = build_visible_matrix(&seq);
    for i in 0..m.n {
        for j in 0..m.n {
            if i != j && (seq.pad[i] || seq.pad[j]) {
                assert!(!m.get(i, j), "{i} {j}");
            }
        }
    }
}

fn decode_logits(model: &CgtModel, prefix: &[usize], memory: &Tensor) -> Tensor {
    let mut tape = Tape::new(&model.params);
    let mut ctx = Ctx::new(&mut tape, Mode::Eval);
    let mem = ctx.tape.constant(memory.clone());
    let pad = vec![false; memory.rows()];
    let out = model.decode(&mut ctx, prefix, mem, &pad).unwrap();
    ctx.tape.value(out).clone()
}

#[test]
fn decoder_is_causal() {
    let model = CgtModel::new(ModelConfig::tiny(50), 4).unwrap();
    let memory = gaussian(5, &[10, 16]);
    let a = decode_logits(&model, &[1, 10, 11, 12, 13], &memory);
    let b = decode_logits(&model, &[1, 10, 11, 40, 41], &memory);
    for r in 0..3 {
        assert_eq!(a.row(r), b.row(r));
    }
    assert_ne!(a.row(3), b.row(3));
}

fn encode_raw(model: &CgtModel, x: &Tensor, m: &VisibleMatrix) -> Tensor {
    let mut tape = Tape::new(&model.params);
    let mut ctx = Ctx::new(&mut tape, Mode::Eval);
    let xv = ctx.tape.constant(x.clone());
    let out = model.encode(&mut ctx, xv, m).unwrap();
    ctx.tape.value(out).clone()
}

#[test]
fn encoder_is_equivariant_under_group_permutation() {
    let mut c = ModelConfig::tiny(50);
    c.encoder_layers = 2;
    let model = CgtModel::new(c.clone(), 6).unwrap();
    let seq = TokenSequence::new(&[9; 24], &c).unwrap();
    let m = build_visible_matrix(&seq);
    let n = seq.len();
    let x = gaussian(7, &[n, c.d_model]);

    // swap groups 1 and 3, keep everything else in place
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..6 {
        perm.swap(1 + k, 13 + k);
    }
    let px = Tensor::from_rows(&(0..n).map(|i| x.row(perm[i]).to_vec()).collect::<Vec<_>>()).unwrap();
    let pm = VisibleMatrix {
        n,
        visible: Rc::new((0..n * n).map(|k| m.get(perm[k / n], perm[k % n])).collect()),
    };
    let y = encode_raw(&model, &x, &m);
    let py = encode_raw(&model, &px, &pm);
    for (i, &p) in perm.iter().enumerate() {
        for (a, b) in py.row(i).iter().zip(y.row(p)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn greedy_generation_is_bounded_and_deterministic() {
    let mut c = ModelConfig::tiny(50);
    c.max_report_len = 7;
    let model = CgtModel::new(c, 8).unwrap();
    let f = gaussian(9, &[12, 1024]);
    let a = model.generate_greedy(&f).unwrap();
    assert!(a.report.len() <= 7);
    assert_eq!(a.slot_ids.len(), 84);
    assert!(a.slot_ids.iter().all(|&t| t >= 4));
    assert_eq!(a, model.generate_greedy(&f).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn argmax_is_scale_invariant(values in proptest::collection::vec(-5.0f64..5.0, 30), scale in 0.01f64..100.0) {
        let t = Tensor::new(vec![3, 10], values).unwrap();
        let mut s = t.clone();
        s.data_mut().iter_mut().for_each(|v| *v *= scale);
        prop_assert_eq!(discretize_subgraph(&t), discretize_subgraph(&s));
    }

    #[test]
    fn visible_matrix_is_symmetric_with_universal_visual_token(len in 0usize..=84) {
        let c = ModelConfig::tiny(50);
        let seq = TokenSequence::new(&vec![5; len], &c).unwrap();
        let m = build_visible_matrix(&seq);
        for i in 0..m.n {
            prop_assert!(m.get(i, i));
            for j in 0..m.n {
                prop_assert_eq!(m.get(i, j), m.get(j, i));
                if i <= len && j <= len && (i == 0 || j == 0) {
                    prop_assert!(m.get(i, j));
                }
            }
        }
    }
}
