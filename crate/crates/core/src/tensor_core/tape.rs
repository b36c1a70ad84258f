//! Reverse-mode differentiation over a linear tape.
//!
//! Every op appends one node holding its forward value. Nodes only reference
//! earlier nodes, so a single reverse sweep propagates gradients.

use std::borrow::Cow;
use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tensor::{axpy, dot};
use super::{Gradients, ParameterSet, Precision, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    Train,
    #[default]
    Eval,
}

/// Rate used by [`Tape::dropout`] unless a model overrides it.
pub const DEFAULT_DROPOUT: f64 = 0.5;

/// Floor applied before taking logs of probabilities.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Affine(Var, f64),
    ScaleBy(Var, Var),
    MatMul(Var, Var),
    MatVec(Var, Var),
    Transpose(Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Stack(Vec<Var>),
    Lookup(Var, usize),
    Tanh(Var),
    Sigmoid(Var),
    Softmax(Var),
    Log(Var),
    Relu(Var),
    Sum(Var),
    Dot(Var, Var),
    Dropout(Var, Vec<f64>),
    CrossEntropy(Var, usize),
    Pick(Var, usize),
    ScatterAdd(Var, Vec<usize>),
    PadTo(Var),
}

struct Node<'p> {
    value: Cow<'p, Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Records forward computations and differentiates them in reverse.
///
/// Parameters are borrowed from a [`ParameterSet`] for the lifetime `'p`, so
/// registering a large matrix costs nothing.
pub struct Tape<'p> {
    nodes: Vec<Node<'p>>,
    params: BTreeMap<String, Var>,
    mode: Mode,
    precision: Precision,
    rng: ChaCha8Rng,
    clamped_logs: usize,
}

impl<'p> Tape<'p> {
    pub fn new(mode: Mode) -> Self {
        Tape {
            nodes: Vec::new(),
            params: BTreeMap::new(),
            mode,
            precision: Precision::F64,
            rng: ChaCha8Rng::seed_from_u64(0),
            clamped_logs: 0,
        }
    }

    /// Seeds the generator that draws dropout masks.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of log evaluations whose argument fell below [`PROB_FLOOR`].
    pub fn clamped_logs(&self) -> usize {
        self.clamped_logs
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.item()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    fn push_leaf(&mut self, value: Cow<'p, Tensor>, requires_grad: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                op: "leaf",
                detail: format!("input of shape {:?} contains NaN or Inf", value.shape()),
            });
        }
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn push(&mut self, op_name: &'static str, op: Op, mut value: Tensor, inputs: &[Var]) -> Result<Var> {
        self.precision.round(value.data_mut());
        if !value.is_finite() {
            return Err(Error::NonFinite {
                op: op_name,
                detail: format!("output of shape {:?}", value.shape()),
            });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Leaf that receives a gradient.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Result<Var> {
        self.push_leaf(Cow::Owned(value), requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.push_leaf(Cow::Owned(value), false)
    }

    pub fn constant_ref(&mut self, value: &'p Tensor) -> Result<Var> {
        self.push_leaf(Cow::Borrowed(value), false)
    }

    /// Registers a trainable parameter. Repeated calls return the same node.
    pub fn param(&mut self, set: &'p ParameterSet, name: &str) -> Result<Var> {
        if let Some(&v) = self.params.get(name) {
            return Ok(v);
        }
        let v = self.push_leaf(Cow::Borrowed(set.get(name)?), true)?;
        self.params.insert(name.to_string(), v);
        Ok(v)
    }

    /// Registers a parameter as a constant (no gradient).
    pub fn frozen(&mut self, set: &'p ParameterSet, name: &str) -> Result<Var> {
        self.constant_ref(set.get(name)?)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        Ok(())
    }

    fn zip_map(&mut self, name: &'static str, op: Op, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        self.same_shape(name, a, b)?;
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        let t = Tensor::new(self.shape(a).to_vec(), data)?;
        self.push(name, op, t, &[a, b])
    }

    fn map(&mut self, name: &'static str, op: Op, a: Var, f: impl Fn(f64) -> f64) -> Result<Var> {
        let data = self.data(a).iter().map(|&x| f(x)).collect();
        let t = Tensor::new(self.shape(a).to_vec(), data)?;
        self.push(name, op, t, &[a])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_map("add", Op::Add(a, b), a, b, |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_map("sub", Op::Sub(a, b), a, b, |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_map("mul", Op::Mul(a, b), a, b, |x, y| x * y)
    }

    /// Adds vector `v` to every row of matrix `m`.
    pub fn add_row(&mut self, m: Var, v: Var) -> Result<Var> {
        let (ms, vs) = (self.shape(m), self.shape(v));
        if ms.len() != 2 || vs.len() != 1 || ms[1] != vs[0] {
            return Err(Error::shape("add_row", format!("{ms:?} + {vs:?}")));
        }
        let cols = ms[1];
        let mut out = self.value(m).clone();
        let vd = self.data(v).to_vec();
        for row in out.data_mut().chunks_mut(cols) {
            for (o, x) in row.iter_mut().zip(&vd) {
                *o += x;
            }
        }
        self.push("add_row", Op::AddRow(m, v), out, &[m, v])
    }

    /// `scale * x + shift`
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Result<Var> {
        self.map("affine", Op::Affine(x, scale), x, |v| scale * v + shift)
    }

    /// Multiplies every entry of `x` by the single-element tensor `s`.
    pub fn scale_by(&mut self, x: Var, s: Var) -> Result<Var> {
        if self.value(s).len() != 1 {
            return Err(Error::shape("scale_by", format!("scale has shape {:?}", self.shape(s))));
        }
        let k = self.scalar(s);
        let data = self.data(x).iter().map(|v| v * k).collect();
        let t = Tensor::new(self.shape(x).to_vec(), data)?;
        self.push("scale_by", Op::ScaleBy(x, s), t, &[x, s])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::shape("matmul", format!("{sa:?} x {sb:?}")));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        let (ad, bd) = (self.data(a), self.data(b));
        for i in 0..m {
            let orow = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                axpy(orow, ad[i * k + p], &bd[p * n..(p + 1) * n]);
            }
        }
        let t = Tensor::new(vec![m, n], out)?;
        self.push("matmul", Op::MatMul(a, b), t, &[a, b])
    }

    /// Matrix `[m, k]` times vector `[k]`.
    pub fn matvec(&mut self, a: Var, x: Var) -> Result<Var> {
        let (sa, sx) = (self.shape(a), self.shape(x));
        if sa.len() != 2 || sx.len() != 1 || sa[1] != sx[0] {
            return Err(Error::shape("matvec", format!("{sa:?} x {sx:?}")));
        }
        let k = sa[1];
        let xd = self.data(x);
        let out: Vec<f64> = self.data(a).chunks(k).map(|row| dot(row, xd)).collect();
        let t = Tensor::vector(out);
        self.push("matvec", Op::MatVec(a, x), t, &[a, x])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let sa = self.shape(a);
        if sa.len() != 2 {
            return Err(Error::shape("transpose", format!("{sa:?}")));
        }
        let (r, c) = (sa[0], sa[1]);
        let ad = self.data(a);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = ad[i * c + j];
            }
        }
        let t = Tensor::new(vec![c, r], out)?;
        self.push("transpose", Op::Transpose(a), t, &[a])
    }

    /// Concatenates vectors.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let mut out = Vec::new();
        for &p in parts {
            if self.shape(p).len() != 1 {
                return Err(Error::shape("concat", format!("part of shape {:?}", self.shape(p))));
            }
            out.extend_from_slice(self.data(p));
        }
        if out.is_empty() {
            return Err(Error::shape("concat", "no parts"));
        }
        self.push("concat", Op::Concat(parts.to_vec()), Tensor::vector(out), parts)
    }

    /// Entries `start..start + len` of a vector.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let sx = self.shape(x);
        if sx.len() != 1 || len == 0 || start + len > sx[0] {
            return Err(Error::shape("slice", format!("{start}..{} of {sx:?}", start + len)));
        }
        let t = Tensor::vector(self.data(x)[start..start + len].to_vec());
        self.push("slice", Op::Slice(x, start), t, &[x])
    }

    /// Stacks equal-length vectors into a matrix.
    pub fn stack(&mut self, rows: &[Var]) -> Result<Var> {
        let tensors: Vec<Tensor> = rows.iter().map(|&r| self.value(r).clone()).collect();
        if tensors.iter().any(|t| t.rank() != 1) {
            return Err(Error::shape("stack", "rows must be vectors"));
        }
        let t = Tensor::stack_rows(&tensors)?;
        self.push("stack", Op::Stack(rows.to_vec()), t, rows)
    }

    /// Row `index` of an embedding matrix.
    pub fn embedding_lookup(&mut self, table: Var, index: usize) -> Result<Var> {
        let st = self.shape(table);
        if st.len() != 2 || index >= st[0] {
            return Err(Error::shape("embedding_lookup", format!("row {index} of {st:?}")));
        }
        let t = self.value(table).row_tensor(index);
        self.push("embedding_lookup", Op::Lookup(table, index), t, &[table])
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.map("tanh", Op::Tanh(x), x, f64::tanh)
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.map("sigmoid", Op::Sigmoid(x), x, sigmoid)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.map("relu", Op::Relu(x), x, |v| v.max(0.0))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let width = self.value(x).cols();
        let mut out = self.data(x).to_vec();
        for row in out.chunks_mut(width) {
            softmax_in_place(row);
        }
        let t = Tensor::new(self.shape(x).to_vec(), out)?;
        self.push("softmax", Op::Softmax(x), t, &[x])
    }

    /// Natural log with arguments clamped at [`PROB_FLOOR`].
    pub fn log(&mut self, x: Var) -> Result<Var> {
        let clamped = self.data(x).iter().filter(|&&v| v < PROB_FLOOR).count();
        self.clamped_logs += clamped;
        self.map("log", Op::Log(x), x, |v| v.max(PROB_FLOOR).ln())
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.data(x).iter().sum();
        self.push("sum", Op::Sum(x), Tensor::scalar(s), &[x])
    }

    /// Sum of scalars (or any tensors) in order.
    pub fn sum_all(&mut self, xs: &[Var]) -> Result<Var> {
        let (&first, rest) = xs
            .split_first()
            .ok_or_else(|| Error::shape("sum_all", "no terms"))?;
        let mut acc = first;
        for &x in rest {
            acc = self.add(acc, x)?;
        }
        Ok(acc)
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("dot", a, b)?;
        let s = dot(self.data(a), self.data(b));
        self.push("dot", Op::Dot(a, b), Tensor::scalar(s), &[a, b])
    }

    /// Inverted dropout: identity in eval mode, otherwise zeroes entries
    /// with probability `rate` and scales survivors by `1 / (1 - rate)`.
    pub fn dropout(&mut self, x: Var, rate: f64) -> Result<Var> {
        if self.mode == Mode::Eval || rate <= 0.0 {
            return Ok(x);
        }
        if rate >= 1.0 {
            return Err(Error::invalid(format!("dropout rate {rate} must be below 1")));
        }
        let keep = 1.0 / (1.0 - rate);
        let n = self.value(x).len();
        let mask: Vec<f64> = (0..n)
            .map(|_| if self.rng.gen::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let data = self.data(x).iter().zip(&mask).map(|(v, m)| v * m).collect();
        let t = Tensor::new(self.shape(x).to_vec(), data)?;
        self.push("dropout", Op::Dropout(x, mask), t, &[x])
    }

    /// `-log softmax(logits)[target]` for a logit vector.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var> {
        let sl = self.shape(logits);
        if sl.len() != 1 || target >= sl[0] {
            return Err(Error::shape("cross_entropy", format!("target {target} for {sl:?}")));
        }
        let d = self.data(logits);
        let max = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + d.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let loss = lse - d[target];
        self.push("cross_entropy", Op::CrossEntropy(logits, target), Tensor::scalar(loss), &[logits])
    }

    /// Single entry of a vector as a scalar.
    pub fn pick(&mut self, x: Var, index: usize) -> Result<Var> {
        let sx = self.shape(x);
        if sx.len() != 1 || index >= sx[0] {
            return Err(Error::shape("pick", format!("index {index} of {sx:?}")));
        }
        let v = self.data(x)[index];
        self.push("pick", Op::Pick(x, index), Tensor::scalar(v), &[x])
    }

    /// `out[index[j]] += x[j]` into a zero vector of length `size`.
    pub fn scatter_add(&mut self, x: Var, index: &[usize], size: usize) -> Result<Var> {
        let sx = self.shape(x);
        if sx.len() != 1 || sx[0] != index.len() || index.iter().any(|&i| i >= size) {
            return Err(Error::shape(
                "scatter_add",
                format!("{sx:?} into {size} with {} indices", index.len()),
            ));
        }
        let mut out = vec![0.0; size];
        for (&i, v) in index.iter().zip(self.data(x)) {
            out[i] += v;
        }
        self.push("scatter_add", Op::ScatterAdd(x, index.to_vec()), Tensor::vector(out), &[x])
    }

    /// Extends a vector with trailing zeros up to `size`.
    pub fn pad_to(&mut self, x: Var, size: usize) -> Result<Var> {
        let sx = self.shape(x);
        if sx.len() != 1 || sx[0] > size {
            return Err(Error::shape("pad_to", format!("{sx:?} to {size}")));
        }
        let mut out = self.data(x).to_vec();
        out.resize(size, 0.0);
        self.push("pad_to", Op::PadTo(x), Tensor::vector(out), &[x])
    }

    /// Propagates d(loss)/d(node) back to every leaf that requires a gradient.
    pub fn backward(&self, loss: Var) -> Result<GradTable> {
        if self.value(loss).len() != 1 {
            return Err(Error::NonScalarLoss(self.shape(loss).to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backward_node(&node.op, &node.value, &g, &mut grads);
        }
        let leaves = grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| match self.nodes[i].op {
                Op::Leaf if self.nodes[i].requires_grad => g,
                _ => None,
            })
            .collect();
        Ok(GradTable {
            grads: leaves,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
            params: self.params.clone(),
        })
    }

    fn backward_node(&self, op: &Op, out: &Tensor, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let y = out.data();
        match op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.acc(grads, *a, |ga| axpy(ga, 1.0, g));
                self.acc(grads, *b, |gb| axpy(gb, 1.0, g));
            }
            Op::Sub(a, b) => {
                self.acc(grads, *a, |ga| axpy(ga, 1.0, g));
                self.acc(grads, *b, |gb| axpy(gb, -1.0, g));
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (self.data(*a), self.data(*b));
                self.acc(grads, *a, |ga| {
                    for ((x, gi), bi) in ga.iter_mut().zip(g).zip(bd) {
                        *x += gi * bi;
                    }
                });
                self.acc(grads, *b, |gb| {
                    for ((x, gi), ai) in gb.iter_mut().zip(g).zip(ad) {
                        *x += gi * ai;
                    }
                });
            }
            Op::AddRow(m, v) => {
                self.acc(grads, *m, |gm| axpy(gm, 1.0, g));
                let cols = self.shape(*v)[0];
                self.acc(grads, *v, |gv| {
                    for row in g.chunks(cols) {
                        axpy(gv, 1.0, row);
                    }
                });
            }
            Op::Affine(x, scale) => self.acc(grads, *x, |gx| axpy(gx, *scale, g)),
            Op::ScaleBy(x, s) => {
                let k = self.scalar(*s);
                self.acc(grads, *x, |gx| axpy(gx, k, g));
                let xd = self.data(*x);
                self.acc(grads, *s, |gs| gs[0] += dot(g, xd));
            }
            Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let (ad, bd) = (self.data(*a), self.data(*b));
                self.acc(grads, *a, |ga| {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            ga[i * k + p] += dot(grow, &bd[p * n..(p + 1) * n]);
                        }
                    }
                });
                self.acc(grads, *b, |gb| {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            axpy(&mut gb[p * n..(p + 1) * n], ad[i * k + p], grow);
                        }
                    }
                });
            }
            Op::MatVec(a, x) => {
                let k = self.shape(*a)[1];
                let (ad, xd) = (self.data(*a), self.data(*x));
                self.acc(grads, *a, |ga| {
                    for (r, &gr) in g.iter().enumerate() {
                        if gr != 0.0 {
                            axpy(&mut ga[r * k..(r + 1) * k], gr, xd);
                        }
                    }
                });
                self.acc(grads, *x, |gx| {
                    for (r, &gr) in g.iter().enumerate() {
                        if gr != 0.0 {
                            axpy(gx, gr, &ad[r * k..(r + 1) * k]);
                        }
                    }
                });
            }
            Op::Transpose(a) => {
                let sa = self.shape(*a);
                let (r, c) = (sa[0], sa[1]);
                self.acc(grads, *a, |ga| {
                    for i in 0..r {
                        for j in 0..c {
                            ga[i * c + j] += g[j * r + i];
                        }
                    }
                });
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    self.acc(grads, p, |gp| axpy(gp, 1.0, &g[offset..offset + n]));
                    offset += n;
                }
            }
            Op::Slice(x, start) => {
                let start = *start;
                self.acc(grads, *x, |gx| axpy(&mut gx[start..start + g.len()], 1.0, g));
            }
            Op::Stack(rows) => {
                let w = out.cols();
                for (i, &r) in rows.iter().enumerate() {
                    self.acc(grads, r, |gr| axpy(gr, 1.0, &g[i * w..(i + 1) * w]));
                }
            }
            Op::Lookup(table, row) => {
                let w = g.len();
                self.acc(grads, *table, |gt| axpy(&mut gt[row * w..(row + 1) * w], 1.0, g));
            }
            Op::Tanh(x) => self.acc(grads, *x, |gx| {
                for ((a, gi), yi) in gx.iter_mut().zip(g).zip(y) {
                    *a += gi * (1.0 - yi * yi);
                }
            }),
            Op::Sigmoid(x) => self.acc(grads, *x, |gx| {
                for ((a, gi), yi) in gx.iter_mut().zip(g).zip(y) {
                    *a += gi * yi * (1.0 - yi);
                }
            }),
            Op::Softmax(x) => {
                let w = out.cols();
                self.acc(grads, *x, |gx| {
                    for ((gxr, gr), yr) in gx.chunks_mut(w).zip(g.chunks(w)).zip(y.chunks(w)) {
                        let s = dot(gr, yr);
                        for ((a, gi), yi) in gxr.iter_mut().zip(gr).zip(yr) {
                            *a += yi * (gi - s);
                        }
                    }
                });
            }
            Op::Log(x) => {
                let xd = self.data(*x);
                self.acc(grads, *x, |gx| {
                    for ((a, gi), xi) in gx.iter_mut().zip(g).zip(xd) {
                        if *xi >= PROB_FLOOR {
                            *a += gi / xi;
                        }
                    }
                });
            }
            Op::Relu(x) => {
                let xd = self.data(*x);
                self.acc(grads, *x, |gx| {
                    for ((a, gi), xi) in gx.iter_mut().zip(g).zip(xd) {
                        if *xi > 0.0 {
                            *a += gi;
                        }
                    }
                });
            }
            Op::Sum(x) => self.acc(grads, *x, |gx| {
                for a in gx.iter_mut() {
                    *a += g[0];
                }
            }),
            Op::Dot(a, b) => {
                let (ad, bd) = (self.data(*a), self.data(*b));
                self.acc(grads, *a, |ga| axpy(ga, g[0], bd));
                self.acc(grads, *b, |gb| axpy(gb, g[0], ad));
            }
            Op::Dropout(x, mask) => self.acc(grads, *x, |gx| {
                for ((a, gi), m) in gx.iter_mut().zip(g).zip(mask) {
                    *a += gi * m;
                }
            }),
            Op::CrossEntropy(logits, target) => {
                let mut p = self.data(*logits).to_vec();
                softmax_in_place(&mut p);
                p[*target] -= 1.0;
                self.acc(grads, *logits, |gl| axpy(gl, g[0], &p));
            }
            Op::Pick(x, index) => self.acc(grads, *x, |gx| gx[*index] += g[0]),
            Op::ScatterAdd(x, index) => self.acc(grads, *x, |gx| {
                for (a, &i) in gx.iter_mut().zip(index) {
                    *a += g[i];
                }
            }),
            Op::PadTo(x) => self.acc(grads, *x, |gx| {
                let n = gx.len();
                axpy(gx, 1.0, &g[..n]);
            }),
        }
    }

    #[inline]
    fn acc(&self, grads: &mut [Option<Vec<f64>>], v: Var, f: impl FnOnce(&mut [f64])) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        let n = self.nodes[v.0].value.len();
        let slot = grads[v.0].get_or_insert_with(|| vec![0.0; n]);
        f(slot);
    }
}

/// Gradients of the leaves of a tape after [`Tape::backward`].
pub struct GradTable {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
    params: BTreeMap<String, Var>,
}

impl GradTable {
    /// Gradient of a leaf; `None` when it does not require a gradient or the
    /// loss does not depend on it.
    pub fn wrt(&self, v: Var) -> Option<Tensor> {
        self.grads[v.0]
            .as_ref()
            .map(|g| Tensor::new(self.shapes[v.0].clone(), g.clone()).expect("gradient shape"))
    }

    /// Gradients of every registered parameter, zero-filled where the loss
    /// does not reach a parameter.
    pub fn parameters(&self) -> Gradients {
        let mut out = Gradients::new();
        for (name, v) in &self.params {
            let g = self
                .wrt(*v)
                .unwrap_or_else(|| Tensor::zeros(&self.shapes[v.0]));
            out.insert(name.clone(), g);
        }
        out
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}
