//! Reverse-mode automatic differentiation on a Wengert tape.
//!
//! A [`Tape`] records one forward pass as a topologically ordered list of
//! operations over [`TensorData`] nodes, then replays it in reverse to
//! accumulate gradients. The contract is one tape per forward pass: the
//! caller zeroes parameter gradients, records, calls [`Tape::backward`]
//! once, and drops the tape. A second backward on the same tape panics.

use std::collections::HashMap;

use crate::params::{ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::{matmul_acc, matmul_at_acc, matmul_bt_acc, TensorData};

/// Probability floor applied before every log in the cross-entropy ops,
/// keeping losses finite when a softmax output underflows.
pub const PROB_FLOOR: f64 = 1e-12;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Per-row classification target: `Some(class)` for positions that
/// contribute to the loss, `None` for masked or invalid positions.
pub type RowTargets = Vec<Option<usize>>;

#[derive(Debug)]
enum Op<S> {
    Leaf,
    MatMul { a: Var, b: Var },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Sigmoid { x: Var },
    Tanh { x: Var },
    AddBias { x: Var, bias: Var },
    Scale { x: Var, c: S },
    Sum { x: Var },
    Softmax { x: Var },
    /// Fused softmax + cross entropy, mean over valid rows.
    /// `probs` holds the row softmax computed during forward.
    SoftmaxXent { logits: Var, targets: RowTargets, valid: usize, probs: TensorData<S> },
    /// Mean cross entropy taking an explicit distribution (e.g. a softmax
    /// output already on the tape).
    CrossEntropy { probs: Var, targets: RowTargets, valid: usize },
    Concat { parts: Vec<Var>, axis: usize },
    SliceRows { x: Var, start: usize, len: usize },
    Lookup { table: Var, ids: Vec<usize> },
}

#[derive(Debug)]
struct Node<S> {
    op: Op<S>,
    value: TensorData<S>,
    requires_grad: bool,
    param: Option<ParamId>,
}

#[derive(Debug, Default)]
pub struct Tape<S> {
    nodes: Vec<Node<S>>,
    grads: Vec<Option<TensorData<S>>>,
    param_vars: HashMap<ParamId, Var>,
    backward_ran: bool,
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), grads: Vec::new(), param_vars: HashMap::new(), backward_ran: false }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &TensorData<S> {
        &self.nodes[v.0].value
    }

    /// Value of a scalar node.
    pub fn scalar_value(&self, v: Var) -> S {
        let t = self.value(v);
        assert_eq!(t.numel(), 1, "expected scalar node, got shape {:?}", t.shape());
        t.data()[0]
    }

    /// Gradient accumulated at `v` by the last backward pass, if any.
    pub fn grad(&self, v: Var) -> Option<&TensorData<S>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    fn push(&mut self, op: Op<S>, value: TensorData<S>, requires_grad: bool) -> Var {
        let id = Var(self.nodes.len());
        self.nodes.push(Node { op, value, requires_grad, param: None });
        id
    }

    fn requires(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A constant leaf: participates in forward math, receives no gradient.
    pub fn constant(&mut self, value: TensorData<S>) -> Var {
        self.push(Op::Leaf, value, false)
    }

    /// A differentiable leaf that is not a stored parameter; its gradient is
    /// readable via [`Tape::grad`] after backward.
    pub fn input(&mut self, value: TensorData<S>) -> Var {
        self.push(Op::Leaf, value, true)
    }

    /// Register a stored parameter on this tape. Repeated registration of
    /// the same parameter returns the original node, so each parameter
    /// appears on the tape at most once.
    pub fn param(&mut self, store: &ParamStore<S>, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        let v = self.push(Op::Leaf, store.value(id).clone(), true);
        self.nodes[v.0].param = Some(id);
        self.param_vars.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (sa, sb) = (self.value(a).shape().to_vec(), self.value(b).shape().to_vec());
        assert!(
            sa.len() == 2 && sb.len() == 2 && sa[1] == sb[0],
            "matmul dimension mismatch: {sa:?} x {sb:?}"
        );
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![S::zero(); m * n];
        matmul_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let req = self.requires(a) || self.requires(b);
        self.push(Op::MatMul { a, b }, TensorData::new(vec![m, n], out), req)
    }

    fn binary_elementwise(
        &mut self,
        a: Var,
        b: Var,
        name: &str,
        f: impl Fn(S, S) -> S,
        op: Op<S>,
    ) -> Var {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        assert_eq!(sa, sb, "{name} shape mismatch: {sa:?} vs {sb:?}");
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = TensorData::new(sa.to_vec(), data);
        let req = self.requires(a) || self.requires(b);
        self.push(op, value, req)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary_elementwise(a, b, "add", |x, y| x + y, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary_elementwise(a, b, "sub", |x, y| x - y, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary_elementwise(a, b, "mul", |x, y| x * y, Op::Mul { a, b })
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let one = S::one();
        let data = self
            .value(x)
            .data()
            .iter()
            .map(|&v| one / (one + (-v).exp()))
            .collect();
        let value = TensorData::new(self.value(x).shape().to_vec(), data);
        let req = self.requires(x);
        self.push(Op::Sigmoid { x }, value, req)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let data = self.value(x).data().iter().map(|&v| v.tanh()).collect();
        let value = TensorData::new(self.value(x).shape().to_vec(), data);
        let req = self.requires(x);
        self.push(Op::Tanh { x }, value, req)
    }

    /// `x + bias` with `bias` broadcast over the rows of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Var {
        let (sx, sb) = (self.value(x).shape().to_vec(), self.value(bias).shape().to_vec());
        let cols = *sx.last().expect("add_bias on 0-d tensor");
        assert!(
            sb.len() == 1 && sb[0] == cols,
            "add_bias shape mismatch: {sx:?} + {sb:?}"
        );
        let rows = self.value(x).numel() / cols.max(1);
        let mut data = self.value(x).data().to_vec();
        let b = self.value(bias).data();
        for r in 0..rows {
            for j in 0..cols {
                data[r * cols + j] = data[r * cols + j] + b[j];
            }
        }
        let req = self.requires(x) || self.requires(bias);
        self.push(Op::AddBias { x, bias }, TensorData::new(sx, data), req)
    }

    pub fn scale(&mut self, x: Var, c: S) -> Var {
        let data = self.value(x).data().iter().map(|&v| v * c).collect();
        let value = TensorData::new(self.value(x).shape().to_vec(), data);
        let req = self.requires(x);
        self.push(Op::Scale { x, c }, value, req)
    }

    /// Sum of all entries, as a scalar node.
    pub fn sum(&mut self, x: Var) -> Var {
        let total = self.value(x).data().iter().fold(S::zero(), |acc, &v| acc + v);
        let req = self.requires(x);
        self.push(Op::Sum { x }, TensorData::scalar(total), req)
    }

    /// Row-wise softmax over the last axis, max-stabilized.
    pub fn softmax(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let cols = t.cols();
        assert!(cols >= 1, "softmax over empty last axis");
        let value = softmax_rows(t);
        let req = self.requires(x);
        let _ = cols;
        self.push(Op::Softmax { x }, value, req)
    }

    /// Fused softmax + cross entropy against one-hot targets, averaged over
    /// the rows where `targets` is `Some`. Backward routes `(q - p) / valid`
    /// into the logits.
    pub fn softmax_xent(&mut self, logits: Var, targets: RowTargets) -> Var {
        let t = self.value(logits);
        let (rows, cols) = (t.rows(), t.cols());
        assert_eq!(
            targets.len(),
            rows,
            "softmax_xent target count {} does not match {} rows",
            targets.len(),
            rows
        );
        let probs = softmax_rows(t);
        let floor = S::from_f64_lossy(PROB_FLOOR);
        let mut total = S::zero();
        let mut valid = 0usize;
        for (r, tgt) in targets.iter().enumerate() {
            if let Some(c) = *tgt {
                assert!(c < cols, "target class {c} out of range for {cols} labels");
                // Clamp only genuinely small values; NaN must pass through
                // so the training loop can detect a poisoned forward pass.
                let q = probs.data()[r * cols + c];
                let q = if q < floor { floor } else { q };
                total = total - q.ln();
                valid += 1;
            }
        }
        assert!(valid > 0, "softmax_xent with zero valid target positions");
        let mean = total / S::from_usize(valid).unwrap();
        let req = self.requires(logits);
        self.push(Op::SoftmaxXent { logits, targets, valid, probs }, TensorData::scalar(mean), req)
    }

    /// Mean cross entropy −log q(true label) over valid rows, taking a
    /// probability distribution directly.
    pub fn cross_entropy(&mut self, probs: Var, targets: RowTargets) -> Var {
        let t = self.value(probs);
        let (rows, cols) = (t.rows(), t.cols());
        assert_eq!(
            targets.len(),
            rows,
            "cross_entropy target count {} does not match {} rows",
            targets.len(),
            rows
        );
        let floor = S::from_f64_lossy(PROB_FLOOR);
        let mut total = S::zero();
        let mut valid = 0usize;
        for (r, tgt) in targets.iter().enumerate() {
            if let Some(c) = *tgt {
                assert!(c < cols, "target class {c} out of range for {cols} labels");
                let q = t.data()[r * cols + c];
                let q = if q < floor { floor } else { q };
                total = total - q.ln();
                valid += 1;
            }
        }
        assert!(valid > 0, "cross_entropy with zero valid target positions");
        let mean = total / S::from_usize(valid).unwrap();
        let req = self.requires(probs);
        self.push(Op::CrossEntropy { probs, targets, valid }, TensorData::scalar(mean), req)
    }

    /// Concatenate along `axis` (0 = rows, 1 = columns).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Var {
        assert!(!parts.is_empty(), "concat of zero tensors");
        assert!(axis <= 1, "concat axis {axis} unsupported");
        let rank = self.value(parts[0]).shape().len();
        for &p in parts {
            let sp = self.value(p).shape();
            assert_eq!(sp.len(), rank, "concat rank mismatch: {:?} vs {:?}", self.value(parts[0]).shape(), sp);
        }
        let value = if rank == 1 {
            assert_eq!(axis, 0, "1-d concat requires axis 0");
            let mut data = Vec::new();
            for &p in parts {
                data.extend_from_slice(self.value(p).data());
            }
            let n = data.len();
            TensorData::new(vec![n], data)
        } else if axis == 0 {
            let cols = self.value(parts[0]).cols();
            let mut data = Vec::new();
            let mut rows = 0;
            for &p in parts {
                let t = self.value(p);
                assert_eq!(
                    t.cols(),
                    cols,
                    "concat axis 0 column mismatch: {:?} vs {:?}",
                    self.value(parts[0]).shape(),
                    t.shape()
                );
                rows += t.shape()[0];
                data.extend_from_slice(t.data());
            }
            TensorData::new(vec![rows, cols], data)
        } else {
            let rows = self.value(parts[0]).shape()[0];
            let total_cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
            for &p in parts {
                assert_eq!(
                    self.value(p).shape()[0],
                    rows,
                    "concat axis 1 row mismatch: {:?} vs {:?}",
                    self.value(parts[0]).shape(),
                    self.value(p).shape()
                );
            }
            let mut data = vec![S::zero(); rows * total_cols];
            let mut col_off = 0;
            for &p in parts {
                let t = self.value(p);
                let c = t.cols();
                for r in 0..rows {
                    data[r * total_cols + col_off..r * total_cols + col_off + c]
                        .copy_from_slice(&t.data()[r * c..(r + 1) * c]);
                }
                col_off += c;
            }
            TensorData::new(vec![rows, total_cols], data)
        };
        let req = parts.iter().any(|&p| self.requires(p));
        self.push(Op::Concat { parts: parts.to_vec(), axis }, value, req)
    }

    /// Contiguous row slice `[start, start+len)` of a 2-d tensor.
    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Var {
        let t = self.value(x);
        let s = t.shape();
        assert_eq!(s.len(), 2, "slice_rows on non-2d shape {s:?}");
        assert!(start + len <= s[0], "slice_rows [{start}, {}) out of {} rows", start + len, s[0]);
        let cols = s[1];
        let data = t.data()[start * cols..(start + len) * cols].to_vec();
        let req = self.requires(x);
        self.push(Op::SliceRows { x, start, len }, TensorData::new(vec![len, cols], data), req)
    }

    /// Row gather from an embedding table; duplicate ids are allowed and
    /// accumulate gradient additively.
    pub fn lookup(&mut self, table: Var, ids: &[usize]) -> Var {
        let t = self.value(table);
        let s = t.shape();
        assert_eq!(s.len(), 2, "lookup table must be 2-d, got {s:?}");
        let (vocab, dim) = (s[0], s[1]);
        let mut data = Vec::with_capacity(ids.len() * dim);
        for &id in ids {
            assert!(id < vocab, "embedding id {id} out of range for table of {vocab} rows");
            data.extend_from_slice(&t.data()[id * dim..(id + 1) * dim]);
        }
        let req = self.requires(table);
        self.push(
            Op::Lookup { table, ids: ids.to_vec() },
            TensorData::new(vec![ids.len(), dim], data),
            req,
        )
    }

    /// Reverse sweep from a scalar `loss`. Populates node gradients and
    /// accumulates parameter gradients into `store` (`+=`, so callers zero
    /// grads between steps per the one-tape-per-pass contract).
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore<S>) {
        assert!(!self.backward_ran, "backward already ran on this tape; record a fresh tape per pass");
        self.backward_ran = true;
        assert_eq!(
            self.nodes[loss.0].value.numel(),
            1,
            "backward requires a scalar loss, got shape {:?}",
            self.nodes[loss.0].value.shape()
        );
        self.grads = self.nodes.iter().map(|_| None).collect();
        self.grads[loss.0] = Some(TensorData::scalar(S::one()));

        for idx in (0..self.nodes.len()).rev() {
            if self.grads[idx].is_none() || !self.nodes[idx].requires_grad {
                continue;
            }
            let out_grad = self.grads[idx].take().expect("grad present");
            self.apply_backward(idx, &out_grad);
            self.grads[idx] = Some(out_grad);
        }

        for (&pid, &var) in &self.param_vars {
            if let Some(g) = &self.grads[var.0] {
                let dst = store.grad_mut(pid).data_mut();
                for (d, s) in dst.iter_mut().zip(g.data()) {
                    *d = *d + *s;
                }
            }
        }
    }

    fn accumulate(&mut self, v: Var, delta_fn: impl FnOnce(&mut TensorData<S>)) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        if self.grads[v.0].is_none() {
            self.grads[v.0] = Some(TensorData::zeros(self.nodes[v.0].value.shape().to_vec()));
        }
        delta_fn(self.grads[v.0].as_mut().expect("just allocated"));
    }

    fn apply_backward(&mut self, idx: usize, g: &TensorData<S>) {
        // Ops only reference earlier nodes, so values borrowed here are
        // disjoint from the grads mutated in accumulate().
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let (a, b) = (*a, *b);
                let (m, k) = (self.nodes[a.0].value.shape()[0], self.nodes[a.0].value.shape()[1]);
                let n = self.nodes[b.0].value.shape()[1];
                let a_data = self.nodes[a.0].value.data().to_vec();
                let b_data = self.nodes[b.0].value.data().to_vec();
                self.accumulate(a, |ga| matmul_bt_acc(g.data(), &b_data, ga.data_mut(), m, n, k));
                self.accumulate(b, |gb| matmul_at_acc(&a_data, g.data(), gb.data_mut(), m, k, n));
            }
            Op::Add { a, b } => {
                let (a, b) = (*a, *b);
                self.accumulate(a, |ga| axpy(S::one(), g.data(), ga.data_mut()));
                self.accumulate(b, |gb| axpy(S::one(), g.data(), gb.data_mut()));
            }
            Op::Sub { a, b } => {
                let (a, b) = (*a, *b);
                self.accumulate(a, |ga| axpy(S::one(), g.data(), ga.data_mut()));
                self.accumulate(b, |gb| axpy(-S::one(), g.data(), gb.data_mut()));
            }
            Op::Mul { a, b } => {
                let (a, b) = (*a, *b);
                let a_data = self.nodes[a.0].value.data().to_vec();
                let b_data = self.nodes[b.0].value.data().to_vec();
                self.accumulate(a, |ga| {
                    for ((d, &gv), &bv) in ga.data_mut().iter_mut().zip(g.data()).zip(&b_data) {
                        *d = *d + gv * bv;
                    }
                });
                self.accumulate(b, |gb| {
                    for ((d, &gv), &av) in gb.data_mut().iter_mut().zip(g.data()).zip(&a_data) {
                        *d = *d + gv * av;
                    }
                });
            }
            Op::Sigmoid { x } => {
                let x = *x;
                let y = self.nodes[idx].value.data().to_vec();
                self.accumulate(x, |gx| {
                    for ((d, &gv), &yv) in gx.data_mut().iter_mut().zip(g.data()).zip(&y) {
                        *d = *d + gv * yv * (S::one() - yv);
                    }
                });
            }
            Op::Tanh { x } => {
                let x = *x;
                let y = self.nodes[idx].value.data().to_vec();
                self.accumulate(x, |gx| {
                    for ((d, &gv), &yv) in gx.data_mut().iter_mut().zip(g.data()).zip(&y) {
                        *d = *d + gv * (S::one() - yv * yv);
                    }
                });
            }
            Op::AddBias { x, bias } => {
                let (x, bias) = (*x, *bias);
                let cols = self.nodes[bias.0].value.numel();
                self.accumulate(x, |gx| axpy(S::one(), g.data(), gx.data_mut()));
                self.accumulate(bias, |gb| {
                    let gbd = gb.data_mut();
                    for (i, &gv) in g.data().iter().enumerate() {
                        gbd[i % cols] = gbd[i % cols] + gv;
                    }
                });
            }
            Op::Scale { x, c } => {
                let (x, c) = (*x, *c);
                self.accumulate(x, |gx| axpy(c, g.data(), gx.data_mut()));
            }
            Op::Sum { x } => {
                let x = *x;
                let gv = g.data()[0];
                self.accumulate(x, |gx| {
                    for d in gx.data_mut() {
                        *d = *d + gv;
                    }
                });
            }
            Op::Softmax { x } => {
                let x = *x;
                let q = self.nodes[idx].value.clone();
                let cols = q.cols();
                self.accumulate(x, |gx| {
                    let rows = q.numel() / cols.max(1);
                    for r in 0..rows {
                        let qr = &q.data()[r * cols..(r + 1) * cols];
                        let gr = &g.data()[r * cols..(r + 1) * cols];
                        let mut dot = S::zero();
                        for j in 0..cols {
                            dot = dot + gr[j] * qr[j];
                        }
                        let dst = &mut gx.data_mut()[r * cols..(r + 1) * cols];
                        for j in 0..cols {
                            dst[j] = dst[j] + qr[j] * (gr[j] - dot);
                        }
                    }
                });
            }
            Op::SoftmaxXent { logits, targets, valid, probs } => {
                let logits = *logits;
                let scale = g.data()[0] / S::from_usize(*valid).unwrap();
                let cols = probs.cols();
                let probs = probs.clone();
                let targets = targets.clone();
                self.accumulate(logits, |gl| {
                    let gld = gl.data_mut();
                    for (r, tgt) in targets.iter().enumerate() {
                        if let Some(c) = *tgt {
                            let qr = &probs.data()[r * cols..(r + 1) * cols];
                            let dst = &mut gld[r * cols..(r + 1) * cols];
                            for j in 0..cols {
                                let delta = if j == c { S::one() } else { S::zero() };
                                dst[j] = dst[j] + scale * (qr[j] - delta);
                            }
                        }
                    }
                });
            }
            Op::CrossEntropy { probs, targets, valid } => {
                let probs = *probs;
                let scale = g.data()[0] / S::from_usize(*valid).unwrap();
                let floor = S::from_f64_lossy(PROB_FLOOR);
                let q = self.nodes[probs.0].value.clone();
                let cols = q.cols();
                let targets = targets.clone();
                self.accumulate(probs, |gq| {
                    let gqd = gq.data_mut();
                    for (r, tgt) in targets.iter().enumerate() {
                        if let Some(c) = *tgt {
                            let qv = q.data()[r * cols + c];
                            if qv >= floor {
                                gqd[r * cols + c] = gqd[r * cols + c] - scale / qv;
                            }
                        }
                    }
                });
            }
            Op::Concat { parts, axis } => {
                let parts = parts.clone();
                let axis = *axis;
                let rank = self.nodes[idx].value.shape().len();
                if rank == 1 || axis == 0 {
                    let mut off = 0;
                    for p in parts {
                        let len = self.nodes[p.0].value.numel();
                        let gslice = g.data()[off..off + len].to_vec();
                        self.accumulate(p, |gp| axpy(S::one(), &gslice, gp.data_mut()));
                        off += len;
                    }
                } else {
                    let total_cols = self.nodes[idx].value.cols();
                    let rows = self.nodes[idx].value.shape()[0];
                    let mut col_off = 0;
                    for p in parts {
                        let c = self.nodes[p.0].value.cols();
                        let mut gslice = vec![S::zero(); rows * c];
                        for r in 0..rows {
                            gslice[r * c..(r + 1) * c].copy_from_slice(
                                &g.data()[r * total_cols + col_off..r * total_cols + col_off + c],
                            );
                        }
                        self.accumulate(p, |gp| axpy(S::one(), &gslice, gp.data_mut()));
                        col_off += c;
                    }
                }
            }
            Op::SliceRows { x, start, len } => {
                let (x, start, len) = (*x, *start, *len);
                let cols = self.nodes[x.0].value.cols();
                self.accumulate(x, |gx| {
                    let dst = &mut gx.data_mut()[start * cols..(start + len) * cols];
                    axpy(S::one(), g.data(), dst);
                });
            }
            Op::Lookup { table, ids } => {
                let table = *table;
                let ids = ids.clone();
                let dim = self.nodes[table.0].value.cols();
                self.accumulate(table, |gt| {
                    let gtd = gt.data_mut();
                    for (row, &id) in ids.iter().enumerate() {
                        let src = &g.data()[row * dim..(row + 1) * dim];
                        let dst = &mut gtd[id * dim..(id + 1) * dim];
                        for j in 0..dim {
                            dst[j] = dst[j] + src[j];
                        }
                    }
                });
            }
        }
    }
}

fn axpy<S: Scalar>(a: S, x: &[S], y: &mut [S]) {
    debug_assert_eq!(x.len(), y.len());
    for (d, &s) in y.iter_mut().zip(x) {
        *d = *d + a * s;
    }
}

fn softmax_rows<S: Scalar>(t: &TensorData<S>) -> TensorData<S> {
    let cols = t.cols();
    let rows = if cols == 0 { 0 } else { t.numel() / cols };
    let mut out = vec![S::zero(); t.numel()];
    for r in 0..rows {
        let row = &t.data()[r * cols..(r + 1) * cols];
        let mut max = row[0];
        for &v in row {
            if v > max {
                max = v;
            }
        }
        let dst = &mut out[r * cols..(r + 1) * cols];
        let mut sum = S::zero();
        for (d, &v) in dst.iter_mut().zip(row) {
            *d = (v - max).exp();
            sum = sum + *d;
        }
        for d in dst.iter_mut() {
            *d = *d / sum;
        }
    }
    TensorData::new(t.shape().to_vec(), out)
}
