//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every op appends one node; `backward` walks the nodes in reverse and
//! accumulates gradients. Parameters are referenced from a [`ParamStore`]
//! rather than copied onto the tape.

use std::rc::Rc;

use super::kernels::{matmul_nn, matmul_nt, matmul_tn};
use super::{ParamId, ParamStore, Tensor, TensorError};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulNT(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    AddScalar(Var),
    Scale(Var, f64),
    Relu(Var),
    Abs(Var),
    Sum(Var),
    MeanRows(Var),
    MaskedSoftmax(Var),
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Vec<f64>, rstd: Vec<f64> },
    BatchNorm { x: Var, gain: Var, bias: Var, xhat: Vec<f64>, rstd: Vec<f64>, training: bool },
    Conv3x3 { x: Var, w: Var, b: Var, h: usize, w_: usize },
    Gather { table: Var, ids: Vec<usize> },
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    SliceRows { a: Var, start: usize },
    SliceCols { a: Var, start: usize },
    Reshape(Var),
    CrossEntropy { logits: Var, targets: Vec<usize>, ignore: usize, probs: Vec<f64>, count: usize },
}

enum Value {
    Owned(Tensor),
    Param(ParamId),
}

struct Node {
    value: Value,
    op: Op,
    needs_grad: bool,
}

/// Batch statistics observed by a training-mode batch-norm call.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Gradients for the parameters touched by a tape, indexed by [`ParamId`].
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(id.index()).and_then(Option::as_ref)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.iter().all(Option::is_none)
    }

    /// Add `other * weight` into self, allocating where needed.
    pub fn accumulate(&mut self, other: &Gradients, weight: f64) {
        if self.grads.len() < other.grads.len() {
            self.grads.resize(other.grads.len(), None);
        }
        for (mine, theirs) in self.grads.iter_mut().zip(&other.grads) {
            if let Some(t) = theirs {
                match mine {
                    Some(m) => {
                        for (a, b) in m.data_mut().iter_mut().zip(t.data()) {
                            *a += weight * b;
                        }
                    }
                    None => {
                        let mut c = t.clone();
                        c.data_mut().iter_mut().for_each(|v| *v *= weight);
                        *mine = Some(c);
                    }
                }
            }
        }
    }
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

fn shape_err(msg: String) -> TensorError {
    TensorError::Shape(msg)
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self { params, nodes: Vec::with_capacity(1024) }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        match &self.nodes[v.0].value {
            Value::Owned(t) => t,
            Value::Param(id) => self.params.get(*id),
        }
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value: Value::Owned(value), op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    /// A constant input; no gradient flows into it.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// A parameter leaf. Trainable parameters receive gradients.
    pub fn param(&mut self, id: ParamId) -> Var {
        let needs = self.params.is_trainable(id);
        self.nodes.push(Node { value: Value::Param(id), op: Op::Param(id), needs_grad: needs });
        Var(self.nodes.len() - 1)
    }

    pub fn param_named(&mut self, name: &str) -> Result<Var, TensorError> {
        let id = self.params.id(name)?;
        Ok(self.param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (m, k) = self.value(a).dims2();
        let (k2, n) = self.value(b).dims2();
        if k != k2 {
            return Err(shape_err(format!("matmul inner dims {k} vs {k2}")));
        }
        let mut out = vec![0.0; m * n];
        matmul_nn(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b), needs))
    }

    /// a · bᵀ
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (m, k) = self.value(a).dims2();
        let (n, k2) = self.value(b).dims2();
        if k != k2 {
            return Err(shape_err(format!("matmul_nt inner dims {k} vs {k2}")));
        }
        let mut out = vec![0.0; m * n];
        matmul_nt(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMulNT(a, b), needs))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, TensorError> {
        let (r, c) = self.value(a).dims2();
        let out = super::kernels::transpose(self.value(a).data(), r, c);
        let needs = self.needs(a);
        Ok(self.push(Tensor::new(vec![c, r], out)?, Op::Transpose(a), needs))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<(), TensorError> {
        if self.value(a).numel() != self.value(b).numel() || self.value(a).dims2() != self.value(b).dims2() {
            return Err(shape_err(format!(
                "{what}: {:?} vs {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        Ok(())
    }

    fn zip_op(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op, what: &str) -> Result<Var, TensorError> {
        self.same_shape(a, b, what)?;
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.value(a).shape().to_vec();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::new(shape, out)?, op, needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip_op(a, b, |x, y| x + y, Op::Add(a, b), "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip_op(a, b, |x, y| x - y, Op::Sub(a, b), "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip_op(a, b, |x, y| x * y, Op::Mul(a, b), "mul")
    }

    /// Add a row vector to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, TensorError> {
        let (r, c) = self.value(a).dims2();
        if self.value(row).numel() != c {
            return Err(shape_err(format!(
                "add_row: row of {} values against {c} columns",
                self.value(row).numel()
            )));
        }
        let rv = self.value(row).data();
        let mut out = self.value(a).data().to_vec();
        for i in 0..r {
            for (o, &b) in out[i * c..(i + 1) * c].iter_mut().zip(rv) {
                *o += b;
            }
        }
        let shape = self.value(a).shape().to_vec();
        let needs = self.needs(a) || self.needs(row);
        Ok(self.push(Tensor::new(shape, out)?, Op::AddRow(a, row), needs))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var, TensorError> {
        let t = self.value(a);
        let out: Vec<f64> = t.data().iter().map(|v| v + c).collect();
        let shape = t.shape().to_vec();
        let needs = self.needs(a);
        Ok(self.push(Tensor::new(shape, out)?, Op::AddScalar(a), needs))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, TensorError> {
        let t = self.value(a);
        let out: Vec<f64> = t.data().iter().map(|v| v * c).collect();
        let shape = t.shape().to_vec();
        let needs = self.needs(a);
        Ok(self.push(Tensor::new(shape, out)?, Op::Scale(a, c), needs))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, TensorError> {
        let t = self.value(a);
        let out: Vec<f64> = t.data().iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        let shape = t.shape().to_vec();
        let needs = self.needs(a);
        Ok(self.push(Tensor::new(shape, out)?, Op::Relu(a), needs))
    }

    pub fn abs(&mut self, a: Var) -> Result<Var, TensorError> {
        let t = self.value(a);
        let out: Vec<f64> = t.data().iter().map(|v| v.abs()).collect();
        let shape = t.shape().to_vec();
        let needs = self.needs(a);
        Ok(self.push(Tensor::new(shape, out)?, Op::Abs(a), needs))
    }

    /// Sum of all elements, as a one-element tensor.
    pub fn sum(&mut self, a: Var) -> Result<Var, TensorError> {
        let s = self.value(a).sum();
        let needs = self.needs(a);
        Ok(self.push(Tensor::scalar(s), Op::Sum(a), needs))
    }

    /// L1 norm of all elements.
    pub fn l1(&mut self, a: Var) -> Result<Var, TensorError> {
        let abs = self.abs(a)?;
        self.sum(abs)
    }

    pub fn mean_rows(&mut self, a: Var) -> Result<Var, TensorError> {
        let (r, c) = self.value(a).dims2();
        let mut out = vec![0.0; c];
        for i in 0..r {
            for (o, v) in out.iter_mut().zip(self.value(a).row(i)) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|v| *v /= r as f64);
        let needs = self.needs(a);
        Ok(self.push(Tensor::new(vec![1, c], out)?, Op::MeanRows(a), needs))
    }

    /// Row-wise softmax over the visible entries of `mask` (row-major, same
    /// shape as `a`); hidden entries get exactly zero probability.
    pub fn masked_softmax(&mut self, a: Var, mask: Option<&Rc<Vec<bool>>>) -> Result<Var, TensorError> {
        let (r, c) = self.value(a).dims2();
        if let Some(m) = mask {
            if m.len() != r * c {
                return Err(shape_err(format!("mask of {} entries for {r}×{c} scores", m.len())));
            }
        }
        let x = self.value(a).data();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let row = &x[i * c..(i + 1) * c];
            let vis = |j: usize| mask.is_none_or(|m| m[i * c + j]);
            let mut max = f64::NEG_INFINITY;
            for (j, &v) in row.iter().enumerate() {
                if vis(j) && v > max {
                    max = v;
                }
            }
            if max == f64::NEG_INFINITY {
                return Err(TensorError::Contract(format!("softmax row {i} has no visible entries")));
            }
            let mut total = 0.0;
            for (j, &v) in row.iter().enumerate() {
                if vis(j) {
                    let e = (v - max).exp();
                    out[i * c + j] = e;
                    total += e;
                }
            }
            for o in &mut out[i * c..(i + 1) * c] {
                *o /= total;
            }
        }
        let shape = self.value(a).shape().to_vec();
        let needs = self.needs(a);
        Ok(self.push(Tensor::new(shape, out)?, Op::MaskedSoftmax(a), needs))
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var, TensorError> {
        self.masked_softmax(a, None)
    }

    /// Per-row normalization over the last axis followed by an affine map.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var, TensorError> {
        let (r, d) = self.value(x).dims2();
        if d == 0 {
            return Err(shape_err("layer_norm over zero features".into()));
        }
        if self.value(gain).numel() != d || self.value(bias).numel() != d {
            return Err(shape_err(format!("layer_norm affine params must have {d} values")));
        }
        let xs = self.value(x).data();
        let g = self.value(gain).data();
        let b = self.value(bias).data();
        let mut xhat = vec![0.0; r * d];
        let mut rstd = vec![0.0; r];
        let mut out = vec![0.0; r * d];
        for i in 0..r {
            let row = &xs[i * d..(i + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let rs = 1.0 / (var + eps).sqrt();
            rstd[i] = rs;
            for j in 0..d {
                let h = (row[j] - mean) * rs;
                xhat[i * d + j] = h;
                out[i * d + j] = g[j] * h + b[j];
            }
        }
        let shape = self.value(x).shape().to_vec();
        let needs = self.needs(x) || self.needs(gain) || self.needs(bias);
        Ok(self.push(Tensor::new(shape, out)?, Op::LayerNorm { x, gain, bias, xhat, rstd }, needs))
    }

    /// Batch normalization over the rows of `x` (one channel per column)
    /// using the batch's own population statistics.
    pub fn batch_norm_train(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<(Var, BatchStats), TensorError> {
        let (n, c) = self.value(x).dims2();
        let mut mean = vec![0.0; c];
        let mut var = vec![0.0; c];
        {
            let xs = self.value(x).data();
            for i in 0..n {
                for j in 0..c {
                    mean[j] += xs[i * c + j];
                }
            }
            mean.iter_mut().for_each(|m| *m /= n as f64);
            for i in 0..n {
                for j in 0..c {
                    let d = xs[i * c + j] - mean[j];
                    var[j] += d * d;
                }
            }
            var.iter_mut().for_each(|v| *v /= n as f64);
        }
        let v = self.batch_norm_with(x, gain, bias, &mean, &var, eps, true)?;
        Ok((v, BatchStats { mean, var }))
    }

    /// Batch normalization with fixed (running) statistics.
    pub fn batch_norm_eval(&mut self, x: Var, gain: Var, bias: Var, mean: &[f64], var: &[f64], eps: f64) -> Result<Var, TensorError> {
        self.batch_norm_with(x, gain, bias, mean, var, eps, false)
    }

    #[allow(clippy::too_many_arguments)]
    fn batch_norm_with(
        &mut self,
        x: Var,
        gain: Var,
        bias: Var,
        mean: &[f64],
        var: &[f64],
        eps: f64,
        training: bool,
    ) -> Result<Var, TensorError> {
        let (n, c) = self.value(x).dims2();
        if mean.len() != c || var.len() != c || self.value(gain).numel() != c || self.value(bias).numel() != c {
            return Err(shape_err(format!("batch_norm expects {c} channels")));
        }
        let xs = self.value(x).data();
        let g = self.value(gain).data();
        let b = self.value(bias).data();
        let rstd: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let mut xhat = vec![0.0; n * c];
        let mut out = vec![0.0; n * c];
        for i in 0..n {
            for j in 0..c {
                let h = (xs[i * c + j] - mean[j]) * rstd[j];
                xhat[i * c + j] = h;
                out[i * c + j] = g[j] * h + b[j];
            }
        }
        let shape = self.value(x).shape().to_vec();
        let needs = self.needs(x) || self.needs(gain) || self.needs(bias);
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::BatchNorm { x, gain, bias, xhat, rstd, training },
            needs,
        ))
    }

    /// 3×3 cross-correlation of a single-channel `h×w` map with zero "same"
    /// padding. `weight` is `[c_out, 9]` (kernel rows flattened), `bias` is
    /// `[c_out]`; the result is `[c_out·h, w]`.
    pub fn conv3x3(&mut self, x: Var, weight: Var, bias: Var) -> Result<Var, TensorError> {
        let (h, w) = self.value(x).dims2();
        let (c_out, k) = self.value(weight).dims2();
        if k != 9 {
            return Err(shape_err(format!("conv3x3 kernel must have 9 taps, got {k}")));
        }
        if self.value(bias).numel() != c_out {
            return Err(shape_err("conv3x3 bias must have one value per output channel".into()));
        }
        let xs = self.value(x).data();
        let ws = self.value(weight).data();
        let bs = self.value(bias).data();
        let mut out = vec![0.0; c_out * h * w];
        for c in 0..c_out {
            let plane = &mut out[c * h * w..(c + 1) * h * w];
            plane.iter_mut().for_each(|v| *v = bs[c]);
            for ky in 0..3 {
                for kx in 0..3 {
                    let wt = ws[c * 9 + ky * 3 + kx];
                    for y in 0..h {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let src = &xs[sy as usize * w..(sy as usize + 1) * w];
                        let dst = &mut plane[y * w..(y + 1) * w];
                        let (x0, x1) = match kx {
                            0 => (1, w),
                            1 => (0, w),
                            _ => (0, w.saturating_sub(1)),
                        };
                        for xx in x0..x1 {
                            dst[xx] += wt * src[xx + kx - 1];
                        }
                    }
                }
            }
        }
        let needs = self.needs(x) || self.needs(weight) || self.needs(bias);
        Ok(self.push(
            Tensor::new(vec![c_out * h, w], out)?,
            Op::Conv3x3 { x, w: weight, b: bias, h, w_: w },
            needs,
        ))
    }

    /// Row lookup into an embedding table.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var, TensorError> {
        let (v, d) = self.value(table).dims2();
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= v {
                return Err(TensorError::Index { index: id, len: v });
            }
            out.extend_from_slice(self.value(table).row(id));
        }
        if ids.is_empty() {
            return Err(shape_err("gather with no indices".into()));
        }
        let needs = self.needs(table);
        Ok(self.push(
            Tensor::new(vec![ids.len(), d], out)?,
            Op::Gather { table, ids: ids.to_vec() },
            needs,
        ))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let c = self.value(*parts.first().ok_or_else(|| shape_err("concat of nothing".into()))?).cols();
        let mut out = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let (r, pc) = self.value(p).dims2();
            if pc != c {
                return Err(shape_err(format!("concat_rows: {pc} columns vs {c}")));
            }
            out.extend_from_slice(self.value(p).data());
            rows += r;
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(Tensor::new(vec![rows, c], out)?, Op::ConcatRows(parts.to_vec()), needs))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let r = self.value(*parts.first().ok_or_else(|| shape_err("concat of nothing".into()))?).rows();
        let mut total = 0;
        for &p in parts {
            let (pr, pc) = self.value(p).dims2();
            if pr != r {
                return Err(shape_err(format!("concat_cols: {pr} rows vs {r}")));
            }
            total += pc;
        }
        let mut out = vec![0.0; r * total];
        let mut off = 0;
        for &p in parts {
            let t = self.value(p);
            let pc = t.cols();
            for i in 0..r {
                out[i * total + off..i * total + off + pc].copy_from_slice(t.row(i));
            }
            off += pc;
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(Tensor::new(vec![r, total], out)?, Op::ConcatCols(parts.to_vec()), needs))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var, TensorError> {
        let (r, c) = self.value(a).dims2();
        if start + len > r || len == 0 {
            return Err(shape_err(format!("slice_rows {start}..{} of {r}", start + len)));
        }
        let out = self.value(a).data()[start * c..(start + len) * c].to_vec();
        let needs = self.needs(a);
        Ok(self.push(Tensor::new(vec![len, c], out)?, Op::SliceRows { a, start }, needs))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var, TensorError> {
        let (r, c) = self.value(a).dims2();
        if start + len > c || len == 0 {
            return Err(shape_err(format!("slice_cols {start}..{} of {c}", start + len)));
        }
        let t = self.value(a);
        let mut out = Vec::with_capacity(r * len);
        for i in 0..r {
            out.extend_from_slice(&t.row(i)[start..start + len]);
        }
        let needs = self.needs(a);
        Ok(self.push(Tensor::new(vec![r, len], out)?, Op::SliceCols { a, start }, needs))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, TensorError> {
        let t = self.value(a).clone().reshape(shape)?;
        let needs = self.needs(a);
        Ok(self.push(t, Op::Reshape(a), needs))
    }

    /// Mean negative log-likelihood of `targets` under row-wise softmax of
    /// `logits`, skipping rows whose target equals `ignore`. With every row
    /// ignored the loss is defined as zero.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize], ignore: usize) -> Result<Var, TensorError> {
        let (n, v) = self.value(logits).dims2();
        if targets.len() != n {
            return Err(shape_err(format!("{} targets for {n} logit rows", targets.len())));
        }
        let x = self.value(logits).data();
        let mut probs = vec![0.0; n * v];
        let mut loss = 0.0;
        let mut count = 0;
        for i in 0..n {
            let row = &x[i * v..(i + 1) * v];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for j in 0..v {
                let e = (row[j] - max).exp();
                probs[i * v + j] = e;
                total += e;
            }
            for p in &mut probs[i * v..(i + 1) * v] {
                *p /= total;
            }
            let t = targets[i];
            if t == ignore {
                continue;
            }
            if t >= v {
                return Err(TensorError::Index { index: t, len: v });
            }
            loss -= row[t] - max - total.ln();
            count += 1;
        }
        let value = if count == 0 {
            log::warn!("cross-entropy over {n} rows with every target ignored; loss defined as 0");
            0.0
        } else {
            loss / count as f64
        };
        let needs = self.needs(logits);
        Ok(self.push(
            Tensor::scalar(value),
            Op::CrossEntropy { logits, targets: targets.to_vec(), ignore, probs, count },
            needs,
        ))
    }

    /// Reverse pass from a one-element `root`.
    pub fn backward(&self, root: Var) -> Result<Gradients, TensorError> {
        if self.value(root).numel() != 1 {
            return Err(shape_err("backward root must be a scalar".into()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(vec![1.0]);
        let mut out = Gradients { grads: vec![None; self.params.len()] };

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
                if !self.nodes[v.0].needs_grad {
                    return;
                }
                let n = self.value(v).numel();
                let buf = grads[v.0].get_or_insert_with(|| vec![0.0; n]);
                f(buf);
            };
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => {
                    let shape = self.params.get(*id).shape().to_vec();
                    let slot = &mut out.grads[id.index()];
                    match slot {
                        Some(t) => t.data_mut().iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                        None => *slot = Some(Tensor::new(shape, g)?),
                    }
                }
                Op::MatMul(a, b) => {
                    let (m, k) = self.value(*a).dims2();
                    let n = self.value(*b).cols();
                    let bv = self.value(*b).data();
                    let av = self.value(*a).data();
                    acc(*a, &mut |buf| matmul_nt(&g, bv, buf, m, n, k));
                    acc(*b, &mut |buf| matmul_tn(av, &g, buf, m, k, n));
                }
                Op::MatMulNT(a, b) => {
                    // c = a bᵀ, a: m×k, b: n×k
                    let (m, k) = self.value(*a).dims2();
                    let n = self.value(*b).rows();
                    let bv = self.value(*b).data();
                    let av = self.value(*a).data();
                    acc(*a, &mut |buf| matmul_nn(&g, bv, buf, m, n, k));
                    acc(*b, &mut |buf| matmul_tn(&g, av, buf, m, n, k));
                }
                Op::Transpose(a) => {
                    let (r, c) = self.value(*a).dims2();
                    let gt = super::kernels::transpose(&g, c, r);
                    acc(*a, &mut |buf| buf.iter_mut().zip(&gt).for_each(|(x, y)| *x += y));
                }
                Op::Add(a, b) => {
                    acc(*a, &mut |buf| buf.iter_mut().zip(&g).for_each(|(x, y)| *x += y));
                    acc(*b, &mut |buf| buf.iter_mut().zip(&g).for_each(|(x, y)| *x += y));
                }
                Op::Sub(a, b) => {
                    acc(*a, &mut |buf| buf.iter_mut().zip(&g).for_each(|(x, y)| *x += y));
                    acc(*b, &mut |buf| buf.iter_mut().zip(&g).for_each(|(x, y)| *x -= y));
                }
                Op::Mul(a, b) => {
                    let av = self.value(*a).data();
                    let bv = self.value(*b).data();
                    acc(*a, &mut |buf| {
                        for i in 0..buf.len() {
                            buf[i] += g[i] * bv[i];
                        }
                    });
                    acc(*b, &mut |buf| {
                        for i in 0..buf.len() {
                            buf[i] += g[i] * av[i];
                        }
                    });
                }
                Op::AddRow(a, row) => {
                    let c = self.value(*a).cols();
                    acc(*a, &mut |buf| buf.iter_mut().zip(&g).for_each(|(x, y)| *x += y));
                    acc(*row, &mut |buf| {
                        for (i, gv) in g.iter().enumerate() {
                            buf[i % c] += gv;
                        }
                    });
                }
                Op::AddScalar(a) => {
                    acc(*a, &mut |buf| buf.iter_mut().zip(&g).for_each(|(x, y)| *x += y));
                }
                Op::Scale(a, c) => {
                    acc(*a, &mut |buf| buf.iter_mut().zip(&g).for_each(|(x, y)| *x += c * y));
                }
                Op::Relu(a) => {
                    let av = self.value(*a).data();
                    acc(*a, &mut |buf| {
                        for i in 0..buf.len() {
                            if av[i] > 0.0 {
                                buf[i] += g[i];
                            }
                        }
                    });
                }
                Op::Abs(a) => {
                    let av = self.value(*a).data();
                    acc(*a, &mut |buf| {
                        for i in 0..buf.len() {
                            let s = if av[i] > 0.0 {
                                1.0
                            } else if av[i] < 0.0 {
                                -1.0
                            } else {
                                0.0
                            };
                            buf[i] += g[i] * s;
                        }
                    });
                }
                Op::Sum(a) => {
                    let g0 = g[0];
                    acc(*a, &mut |buf| buf.iter_mut().for_each(|x| *x += g0));
                }
                Op::MeanRows(a) => {
                    let (r, c) = self.value(*a).dims2();
                    acc(*a, &mut |buf| {
                        for i in 0..r {
                            for j in 0..c {
                                buf[i * c + j] += g[j] / r as f64;
                            }
                        }
                    });
                }
                Op::MaskedSoftmax(a) => {
                    let y = match &node.value {
                        Value::Owned(t) => t.data(),
                        Value::Param(_) => unreachable!(),
                    };
                    let c = self.value(*a).cols();
                    acc(*a, &mut |buf| {
                        for (i, row) in y.chunks(c).enumerate() {
                            let gr = &g[i * c..(i + 1) * c];
                            let dot: f64 = row.iter().zip(gr).map(|(p, q)| p * q).sum();
                            for j in 0..c {
                                buf[i * c + j] += row[j] * (gr[j] - dot);
                            }
                        }
                    });
                }
                Op::LayerNorm { x, gain, bias, xhat, rstd } => {
                    let d = self.value(*x).cols();
                    let gv = self.value(*gain).data();
                    acc(*gain, &mut |buf| {
                        for (i, gg) in g.iter().enumerate() {
                            buf[i % d] += gg * xhat[i];
                        }
                    });
                    acc(*bias, &mut |buf| {
                        for (i, gg) in g.iter().enumerate() {
                            buf[i % d] += gg;
                        }
                    });
                    acc(*x, &mut |buf| {
                        for (r, rs) in rstd.iter().enumerate() {
                            let off = r * d;
                            let mut s1 = 0.0;
                            let mut s2 = 0.0;
                            for j in 0..d {
                                let dh = g[off + j] * gv[j];
                                s1 += dh;
                                s2 += dh * xhat[off + j];
                            }
                            for j in 0..d {
                                let dh = g[off + j] * gv[j];
                                buf[off + j] += rs / d as f64 * (d as f64 * dh - s1 - xhat[off + j] * s2);
                            }
                        }
                    });
                }
                Op::BatchNorm { x, gain, bias, xhat, rstd, training } => {
                    let (n, c) = self.value(*x).dims2();
                    let gv = self.value(*gain).data();
                    acc(*gain, &mut |buf| {
                        for (i, gg) in g.iter().enumerate() {
                            buf[i % c] += gg * xhat[i];
                        }
                    });
                    acc(*bias, &mut |buf| {
                        for (i, gg) in g.iter().enumerate() {
                            buf[i % c] += gg;
                        }
                    });
                    acc(*x, &mut |buf| {
                        if *training {
                            let mut s1 = vec![0.0; c];
                            let mut s2 = vec![0.0; c];
                            for i in 0..n {
                                for j in 0..c {
                                    let dh = g[i * c + j] * gv[j];
                                    s1[j] += dh;
                                    s2[j] += dh * xhat[i * c + j];
                                }
                            }
                            let nf = n as f64;
                            for i in 0..n {
                                for j in 0..c {
                                    let dh = g[i * c + j] * gv[j];
                                    buf[i * c + j] += rstd[j] / nf * (nf * dh - s1[j] - xhat[i * c + j] * s2[j]);
                                }
                            }
                        } else {
                            for i in 0..n {
                                for j in 0..c {
                                    buf[i * c + j] += g[i * c + j] * gv[j] * rstd[j];
                                }
                            }
                        }
                    });
                }
                Op::Conv3x3 { x, w, b, h, w_ } => {
                    let (h, wd) = (*h, *w_);
                    let c_out = self.value(*w).rows();
                    let xs = self.value(*x).data();
                    let ws = self.value(*w).data();
                    acc(*b, &mut |buf| {
                        for c in 0..c_out {
                            buf[c] += g[c * h * wd..(c + 1) * h * wd].iter().sum::<f64>();
                        }
                    });
                    let taps = |c: usize, ky: usize, kx: usize, f: &mut dyn FnMut(usize, usize)| {
                        for y in 0..h {
                            let sy = y as isize + ky as isize - 1;
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            let (x0, x1) = match kx {
                                0 => (1, wd),
                                1 => (0, wd),
                                _ => (0, wd.saturating_sub(1)),
                            };
                            for xx in x0..x1 {
                                // (output index, source index)
                                f(c * h * wd + y * wd + xx, sy as usize * wd + xx + kx - 1);
                            }
                        }
                    };
                    acc(*w, &mut |buf| {
                        for c in 0..c_out {
                            for ky in 0..3 {
                                for kx in 0..3 {
                                    let mut s = 0.0;
                                    taps(c, ky, kx, &mut |o, src| s += g[o] * xs[src]);
                                    buf[c * 9 + ky * 3 + kx] += s;
                                }
                            }
                        }
                    });
                    acc(*x, &mut |buf| {
                        for c in 0..c_out {
                            for ky in 0..3 {
                                for kx in 0..3 {
                                    let wt = ws[c * 9 + ky * 3 + kx];
                                    taps(c, ky, kx, &mut |o, src| buf[src] += wt * g[o]);
                                }
                            }
                        }
                    });
                }
                Op::Gather { table, ids } => {
                    let d = self.value(*table).cols();
                    acc(*table, &mut |buf| {
                        for (r, &id) in ids.iter().enumerate() {
                            for j in 0..d {
                                buf[id * d + j] += g[r * d + j];
                            }
                        }
                    });
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let n = self.value(p).numel();
                        let slice = &g[off..off + n];
                        acc(p, &mut |buf| buf.iter_mut().zip(slice).for_each(|(x, y)| *x += y));
                        off += n;
                    }
                }
                Op::ConcatCols(parts) => {
                    let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
                    let mut off = 0;
                    for &p in parts {
                        let (r, pc) = self.value(p).dims2();
                        acc(p, &mut |buf| {
                            for i in 0..r {
                                for j in 0..pc {
                                    buf[i * pc + j] += g[i * total + off + j];
                                }
                            }
                        });
                        off += pc;
                    }
                }
                Op::SliceRows { a, start } => {
                    let c = self.value(*a).cols();
                    let s = start * c;
                    acc(*a, &mut |buf| buf[s..s + g.len()].iter_mut().zip(&g).for_each(|(x, y)| *x += y));
                }
                Op::SliceCols { a, start } => {
                    let (r, c) = self.value(*a).dims2();
                    let len = g.len() / r;
                    acc(*a, &mut |buf| {
                        for i in 0..r {
                            for j in 0..len {
                                buf[i * c + start + j] += g[i * len + j];
                            }
                        }
                    });
                }
                Op::Reshape(a) => {
                    acc(*a, &mut |buf| buf.iter_mut().zip(&g).for_each(|(x, y)| *x += y));
                }
                Op::CrossEntropy { logits, targets, ignore, probs, count } => {
                    if *count == 0 {
                        continue;
                    }
                    let v = self.value(*logits).cols();
                    let scale = g[0] / *count as f64;
                    acc(*logits, &mut |buf| {
                        for (i, &t) in targets.iter().enumerate() {
                            if t == *ignore {
                                continue;
                            }
                            for j in 0..v {
                                let onehot = if j == t { 1.0 } else { 0.0 };
                                buf[i * v + j] += scale * (probs[i * v + j] - onehot);
                            }
                        }
                    });
                }
            }
        }
        Ok(out)
    }
}
