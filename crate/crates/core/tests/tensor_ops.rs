use std::rc::Rc;

use cgt_core::tensor::{ParamStore, Tape, Tensor, TensorError, Var};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn t(shape: &[usize], data: &[f64]) -> Tensor {
    Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
}

fn random(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    t(shape, &(0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>())
}

/// Central finite-difference check of d f / d input for every element of
/// every trainable parameter in `store`.
fn check_grads(store: &ParamStore, f: impl Fn(&mut Tape, &[Var]) -> Var, tol: f64) {
    let ids: Vec<_> = store.trainable_ids().collect();
    let eval = |s: &ParamStore| {
        let mut tape = Tape::new(s);
        let vars: Vec<Var> = ids.iter().map(|&id| tape.param(id)).collect();
        let out = f(&mut tape, &vars);
        tape.value(out).data()[0]
    };
    let mut tape = Tape::new(store);
    let vars: Vec<Var> = ids.iter().map(|&id| tape.param(id)).collect();
    let out = f(&mut tape, &vars);
    let grads = tape.backward(out).unwrap();
    let h = 1e-6;
    for &id in &ids {
        let analytic = grads.get(id).cloned().unwrap_or_else(|| Tensor::zeros(store.get(id).shape()));
        for i in 0..store.get(id).numel() {
            let mut plus = store.clone();
            plus.get_mut(id).data_mut()[i] += h;
            let mut minus = store.clone();
            minus.get_mut(id).data_mut()[i] -= h;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let a = analytic.data()[i];
            let denom = a.abs().max(numeric.abs()).max(1e-3);
            assert!(
                (a - numeric).abs() / denom < tol,
                "{}[{i}]: analytic {a} vs numeric {numeric}",
                store.name(id)
            );
        }
    }
}

fn store_of(entries: &[(&str, Tensor)]) -> ParamStore {
    let mut s = ParamStore::new();
    for (n, v) in entries {
        s.insert(n, v.clone(), true).unwrap();
    }
    s
}

#[test]
fn matmul_examples() {
    let s = ParamStore::new();
    let mut tape = Tape::new(&s);
    let i2 = tape.constant(Tensor::eye(2));
    let i2b = tape.constant(Tensor::eye(2));
    let p = tape.matmul(i2, i2b).unwrap();
    assert_eq!(tape.value(p), &Tensor::eye(2));

    let a = tape.constant(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
    let b = tape.constant(t(&[2, 1], &[1.0, 1.0]));
    let c = tape.matmul(a, b).unwrap();
    assert_eq!(tape.value(c).data(), &[3.0, 7.0]);

    let bad = tape.matmul(a, c).unwrap();
    let _ = bad; // 2×2 · 2×1 is fine; now a genuine mismatch
    let r = tape.constant(t(&[3, 1], &[1.0, 1.0, 1.0]));
    assert!(matches!(tape.matmul(a, r), Err(TensorError::Shape(_))));
}

#[test]
fn matmul_gradient_is_row_sums_of_b() {
    let store = store_of(&[("a", random(&[3, 4], 1)), ("b", random(&[4, 2], 2))]);
    let mut tape = Tape::new(&store);
    let a = tape.param_named("a").unwrap();
    let b = tape.param_named("b").unwrap();
    let c = tape.matmul(a, b).unwrap();
    let s = tape.sum(c).unwrap();
    let g = tape.backward(s).unwrap();
    let ga = g.get(store.id("a").unwrap()).unwrap();
    let bt = store.by_name("b").unwrap();
    for i in 0..3 {
        for p in 0..4 {
            let row_sum: f64 = bt.row(p).iter().sum();
            assert!((ga.at(i, p) - row_sum).abs() < 1e-12);
        }
    }
    check_grads(&store, |tp, v| {
        let c = tp.matmul(v[0], v[1]).unwrap();
        tp.sum(c).unwrap()
    }, 1e-6);
}

#[test]
fn masked_softmax_examples() {
    let s = ParamStore::new();
    let mut tape = Tape::new(&s);
    let u = tape.constant(t(&[1, 4], &[0.3; 4]));
    let p = tape.softmax(u).unwrap();
    for &v in tape.value(p).data() {
        assert!((v - 0.25).abs() < 1e-15);
    }

    let x = tape.constant(random(&[3, 3], 5));
    let self_only = Rc::new((0..9).map(|i| i % 4 == 0).collect::<Vec<_>>());
    let p = tape.masked_softmax(x, Some(&self_only)).unwrap();
    assert_eq!(tape.value(p).data(), Tensor::eye(3).data());

    let x = tape.constant(t(&[1, 3], &[1.0, 2.0, 3.0]));
    let m = Rc::new(vec![true, false, true]);
    let p = tape.masked_softmax(x, Some(&m)).unwrap();
    let e1 = 1f64.exp();
    let e3 = 3f64.exp();
    let want = [e1 / (e1 + e3), 0.0, e3 / (e1 + e3)];
    for (a, b) in tape.value(p).data().iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(tape.value(p).data()[1], 0.0);

    let none = Rc::new(vec![false, false, false]);
    assert!(matches!(tape.masked_softmax(x, Some(&none)), Err(TensorError::Contract(_))));
}

#[test]
fn masked_softmax_gradient() {
    let store = store_of(&[("x", random(&[3, 3], 9)), ("w", random(&[3, 3], 10))]);
    let mask = Rc::new(vec![true, false, true, true, true, false, false, true, true]);
    check_grads(&store, move |tp, v| {
        let p = tp.masked_softmax(v[0], Some(&mask)).unwrap();
        let q = tp.mul(p, v[1]).unwrap();
        tp.sum(q).unwrap()
    }, 1e-4);
}

#[test]
fn layer_norm_examples_and_gradient() {
    let s = ParamStore::new();
    let mut tape = Tape::new(&s);
    let g = tape.constant(t(&[2], &[1.0, 1.0]));
    let b = tape.constant(t(&[2], &[0.5, -0.5]));
    let c = tape.constant(t(&[1, 2], &[3.0, 3.0]));
    let y = tape.layer_norm(c, g, b, 1e-5).unwrap();
    assert_eq!(tape.value(y).data(), &[0.5, -0.5]);

    let zero_b = tape.constant(t(&[2], &[0.0, 0.0]));
    let x = tape.constant(t(&[1, 2], &[1.0, -1.0]));
    let y = tape.layer_norm(x, g, zero_b, 1e-5).unwrap();
    let want = 1.0 / (1.0f64 + 1e-5).sqrt();
    assert!((tape.value(y).data()[0] - want).abs() < 1e-12);
    assert!((tape.value(y).data()[1] + want).abs() < 1e-12);

    let x = tape.constant(random(&[4, 6], 3));
    let g6 = tape.constant(Tensor::full(&[6], 1.0));
    let b6 = tape.constant(Tensor::zeros(&[6]));
    let y = tape.layer_norm(x, g6, b6, 1e-5).unwrap();
    for r in 0..4 {
        let row = tape.value(y).row(r);
        let mean = row.iter().sum::<f64>() / 6.0;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 6.0;
        assert!(mean.abs() < 1e-7);
        assert!((var - 1.0).abs() < 1e-3, "{var}");
    }

    let store = store_of(&[("x", random(&[3, 5], 4)), ("g", random(&[5], 5)), ("b", random(&[5], 6)), ("w", random(&[3, 5], 7))]);
    check_grads(&store, |tp, v| {
        let y = tp.layer_norm(v[0], v[1], v[2], 1e-5).unwrap();
        let q = tp.mul(y, v[3]).unwrap();
        tp.sum(q).unwrap()
    }, 1e-4);
}

#[test]
fn batch_norm_examples_and_gradient() {
    let s = ParamStore::new();
    let mut tape = Tape::new(&s);
    let one = tape.constant(t(&[1], &[1.0]));
    let zero = tape.constant(t(&[1], &[0.0]));
    let x = tape.constant(t(&[2, 1], &[0.0, 2.0]));
    let (y, stats) = tape.batch_norm_train(x, one, zero, 0.0).unwrap();
    assert_eq!(tape.value(y).data(), &[-1.0, 1.0]);
    assert_eq!(stats.mean, vec![1.0]);
    assert_eq!(stats.var, vec![1.0]);

    let flat = tape.constant(t(&[3, 1], &[4.0, 4.0, 4.0]));
    let (y, _) = tape.batch_norm_train(flat, one, zero, 1e-5).unwrap();
    assert!(tape.value(y).is_finite());

    let two = tape.constant(t(&[1], &[2.0]));
    let x = tape.constant(t(&[2, 1], &[0.5, -1.0]));
    let y = tape.batch_norm_eval(x, two, one, &[0.0], &[1.0], 0.0).unwrap();
    assert_eq!(tape.value(y).data(), &[2.0, -1.0]);

    let store = store_of(&[("x", random(&[5, 2], 14)), ("g", random(&[2], 15)), ("b", random(&[2], 16)), ("w", random(&[5, 2], 17))]);
    check_grads(&store, |tp, v| {
        let (y, _) = tp.batch_norm_train(v[0], v[1], v[2], 1e-5).unwrap();
        let q = tp.mul(y, v[3]).unwrap();
        tp.sum(q).unwrap()
    }, 1e-4);
}

#[test]
fn conv3x3_examples_and_gradient() {
    let s = ParamStore::new();
    let mut tape = Tape::new(&s);
    let x = random(&[12, 1024], 21);
    let xv = tape.constant(x.clone());
    let mut ident = vec![0.0; 9];
    ident[4] = 1.0;
    let k = tape.constant(t(&[1, 9], &ident));
    let b = tape.constant(t(&[1], &[0.0]));
    let y = tape.conv3x3(xv, k, b).unwrap();
    assert_eq!(tape.value(y), &x);

    let mut impulse = vec![0.0; 5 * 6];
    impulse[2 * 6 + 3] = 1.0;
    let xi = tape.constant(t(&[5, 6], &impulse));
    let ones = tape.constant(t(&[1, 9], &[1.0; 9]));
    let y = tape.conv3x3(xi, ones, b).unwrap();
    for r in 0..5 {
        for c in 0..6 {
            let want = if (1..=3).contains(&r) && (2..=4).contains(&c) { 1.0 } else { 0.0 };
            assert_eq!(tape.value(y).at(r, c), want);
        }
    }

    let store = store_of(&[("x", random(&[4, 5], 22)), ("k", random(&[2, 9], 23)), ("b", random(&[2], 24)), ("w", random(&[8, 5], 25))]);
    check_grads(&store, |tp, v| {
        let y = tp.conv3x3(v[0], v[1], v[2]).unwrap();
        let q = tp.mul(y, v[3]).unwrap();
        tp.sum(q).unwrap()
    }, 1e-4);
}

#[test]
fn relu_gather_concat() {
    let store = store_of(&[("table", random(&[5, 3], 31))]);
    let mut tape = Tape::new(&store);
    let x = tape.constant(t(&[3], &[-1.0, 0.0, 2.0]));
    let r = tape.relu(x).unwrap();
    assert_eq!(tape.value(r).data(), &[0.0, 0.0, 2.0]);

    let table = tape.param_named("table").unwrap();
    let row0 = tape.gather(table, &[0]).unwrap();
    assert_eq!(tape.value(row0).data(), store.by_name("table").unwrap().row(0));
    assert!(matches!(tape.gather(table, &[5]), Err(TensorError::Index { .. })));

    let many = tape.gather(table, &[1, 2, 1, 4]).unwrap();
    let cat = tape.concat_rows(&[row0, many]).unwrap();
    assert_eq!(tape.value(cat).shape(), &[5, 3]);

    let s = tape.sum(cat).unwrap();
    let g = tape.backward(s).unwrap();
    let gt = g.get(store.id("table").unwrap()).unwrap();
    // row 1 gathered twice, row 3 never
    assert_eq!(gt.row(1), &[2.0; 3]);
    assert_eq!(gt.row(3), &[0.0; 3]);
    assert_eq!(gt.row(0), &[1.0; 3]);
}

#[test]
fn cross_entropy_examples() {
    let s = ParamStore::new();
    let mut tape = Tape::new(&s);
    let u = tape.constant(Tensor::zeros(&[3, 8]));
    let ce = tape.cross_entropy(u, &[1, 5, 7], usize::MAX).unwrap();
    assert!((tape.value(ce).data()[0] - 8f64.ln()).abs() < 1e-12);

    let mut sharp = vec![0.0; 8];
    sharp[2] = 50.0;
    let sv = tape.constant(t(&[1, 8], &sharp));
    let ce = tape.cross_entropy(sv, &[2], usize::MAX).unwrap();
    assert!(tape.value(ce).data()[0] < 1e-20);

    let logits = random(&[3, 4], 41);
    let lv = tape.constant(logits.clone());
    let ce = tape.cross_entropy(lv, &[0, 99, 3], 99).unwrap();
    // independent log-softmax by hand
    let mut want = 0.0;
    for (r, tgt) in [(0usize, 0usize), (2, 3)] {
        let row = logits.row(r);
        let lse = row.iter().map(|v| v.exp()).sum::<f64>().ln();
        want += lse - row[tgt];
    }
    want /= 2.0;
    assert!((tape.value(ce).data()[0] - want).abs() < 1e-12);

    let ce = tape.cross_entropy(lv, &[99, 99, 99], 99).unwrap();
    assert_eq!(tape.value(ce).data()[0], 0.0);

    let store = store_of(&[("l", random(&[3, 5], 42))]);
    check_grads(&store, |tp, v| tp.cross_entropy(v[0], &[4, 0, 2], usize::MAX).unwrap(), 1e-5);
}

#[test]
fn slices_transpose_and_rows_have_correct_gradients() {
    let store = store_of(&[("a", random(&[4, 6], 51)), ("b", random(&[6, 4], 52))]);
    check_grads(&store, |tp, v| {
        let left = tp.slice_cols(v[0], 1, 3).unwrap();
        let right = tp.slice_cols(v[0], 4, 2).unwrap();
        let cat = tp.concat_cols(&[right, left]).unwrap();
        let top = tp.slice_rows(v[1], 0, 5).unwrap();
        let bt = tp.transpose(top).unwrap();
        let prod = tp.matmul_nt(cat, bt).unwrap();
        let mean = tp.mean_rows(prod).unwrap();
        let sq = tp.mul(mean, mean).unwrap();
        let shifted = tp.add_scalar(sq, 0.25).unwrap();
        let ab = tp.l1(shifted).unwrap();
        tp.scale(ab, 0.5).unwrap()
    }, 1e-5);
}

/// Brute-force Jacobian oracle: the reverse pass of a composed graph on a
/// random 3×3 instance equals Jᵀ·1 assembled from per-op Jacobians built
/// by finite differences of each stage separately.
#[test]
fn composed_backward_equals_jacobian_product() {
    let x0 = random(&[3, 3], 61);
    let w = random(&[3, 3], 62);
    let stage1 = |x: &[f64]| -> Vec<f64> {
        // y = x · w
        let mut y = vec![0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    y[i * 3 + j] += x[i * 3 + k] * w.data()[k * 3 + j];
                }
            }
        }
        y
    };
    let stage2 = |y: &[f64]| -> Vec<f64> {
        // row softmax
        let mut z = vec![0.0; 9];
        for i in 0..3 {
            let m: f64 = (0..3).map(|j| y[i * 3 + j].exp()).sum();
            for j in 0..3 {
                z[i * 3 + j] = y[i * 3 + j].exp() / m;
            }
        }
        z
    };
    let weights: Vec<f64> = (0..9).map(|i| (i as f64 + 1.0) / 3.0).collect();
    let jac = |f: &dyn Fn(&[f64]) -> Vec<f64>, at: &[f64]| -> Vec<Vec<f64>> {
        let h = 1e-6;
        let mut j = vec![vec![0.0; 9]; 9];
        for c in 0..9 {
            let mut p = at.to_vec();
            p[c] += h;
            let mut m = at.to_vec();
            m[c] -= h;
            let (fp, fm) = (f(&p), f(&m));
            for r in 0..9 {
                j[r][c] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        j
    };
    let y0 = stage1(x0.data());
    let j1 = jac(&stage1, x0.data());
    let j2 = jac(&stage2, &y0);
    // grad_x = J1ᵀ J2ᵀ weights
    let mut v = [0.0; 9];
    for c in 0..9 {
        v[c] = (0..9).map(|r| j2[r][c] * weights[r]).sum();
    }
    let mut oracle = [0.0; 9];
    for c in 0..9 {
        oracle[c] = (0..9).map(|r| j1[r][c] * v[r]).sum();
    }

    let store = store_of(&[("x", x0.clone())]);
    let mut tape = Tape::new(&store);
    let x = tape.param_named("x").unwrap();
    let wv = tape.constant(w.clone());
    let y = tape.matmul(x, wv).unwrap();
    let z = tape.softmax(y).unwrap();
    let wt = tape.constant(t(&[3, 3], &weights));
    let prod = tape.mul(z, wt).unwrap();
    let s = tape.sum(prod).unwrap();
    let g = tape.backward(s).unwrap();
    let gx = g.get(store.id("x").unwrap()).unwrap();
    for (i, (a, o)) in gx.data().iter().zip(&oracle).enumerate() {
        assert!((a - o).abs() < 1e-6, "{i}: {a} vs {o}");
    }
}

#[test]
fn ops_are_bitwise_deterministic() {
    let run = || {
        let store = store_of(&[("a", random(&[6, 8], 71)), ("b", random(&[8, 5], 72))]);
        let mut tape = Tape::new(&store);
        let a = tape.param_named("a").unwrap();
        let b = tape.param_named("b").unwrap();
        let c = tape.matmul(a, b).unwrap();
        let r = tape.relu(c).unwrap();
        let s = tape.softmax(r).unwrap();
        let l = tape.cross_entropy(s, &[0, 1, 2, 3, 4, 0], usize::MAX).unwrap();
        let g = tape.backward(l).unwrap();
        (tape.value(l).clone(), g.get(store.id("a").unwrap()).unwrap().clone())
    };
    assert_eq!(run(), run());
}

proptest! {
    #[test]
    fn masked_softmax_rows_are_distributions(
        scores in prop::collection::vec(-20.0f64..20.0, 16),
        bits in prop::collection::vec(any::<bool>(), 16),
    ) {
        let mut mask = bits.clone();
        for i in 0..4 { mask[i * 4 + i] = true; }
        let mask = Rc::new(mask);
        let s = ParamStore::new();
        let mut tape = Tape::new(&s);
        let x = tape.constant(Tensor::new(vec![4, 4], scores).unwrap());
        let p = tape.masked_softmax(x, Some(&mask)).unwrap();
        for r in 0..4 {
            let row = tape.value(p).row(r);
            let total: f64 = row.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            for c in 0..4 {
                if !mask[r * 4 + c] { prop_assert_eq!(row[c], 0.0); }
            }
        }
    }
}
