//! Reverse-mode differentiation over dense vectors.
//!
//! Every node of a [`Tape`] holds a vector value. Parameters live in a
//! [`ParamStore`]; forward operations read them and [`Tape::backward`]
//! accumulates into their gradient arrays. Nodes are appended in evaluation
//! order, so a reverse sweep visits every node exactly once after all of its
//! consumers.

use crate::diffcore::params::{ParamId, ParamStore};

/// A node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    Row { table: ParamId, row: usize },
    MatVec { w: ParamId, x: Var },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Sum(Vec<Var>),
    Scale { s: Var, x: Var },
    ScaleConst { x: Var, c: f64 },
    AddConst(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Ln(Var),
    Concat(Vec<Var>),
    Slice { x: Var, start: usize },
    Pick { x: Var, index: usize },
    Dot(Var, Var),
    Softmax { x: Var, mask: Option<Vec<bool>> },
    LogSoftmax { x: Var, mask: Option<Vec<bool>> },
    WeightedSum { weights: Var, items: Vec<Var> },
    L2Normalize(Var),
    Norm(Var),
}

#[derive(Clone, Debug)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

/// Small constant inside square roots so norms stay differentiable at 0.
const NORM_EPS: f64 = 1e-12;

#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn masked(mask: &Option<Vec<bool>>, i: usize) -> bool {
    mask.as_ref().is_some_and(|m| !m[i])
}

/// Max-subtracted log-sum-exp over the unmasked entries.
fn log_sum_exp(x: &[f64], mask: &Option<Vec<bool>>) -> f64 {
    let max = x
        .iter()
        .enumerate()
        .filter(|&(i, _)| !masked(mask, i))
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = x
        .iter()
        .enumerate()
        .filter(|&(i, _)| !masked(mask, i))
        .map(|(_, &v)| (v - max).exp())
        .sum();
    max + sum.ln()
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    /// Value of a length-1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        debug_assert_eq!(self.nodes[v.0].value.len(), 1);
        self.nodes[v.0].value[0]
    }

    pub fn dim(&self, v: Var) -> usize {
        self.nodes[v.0].value.len()
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// A constant; receives no gradient.
    pub fn leaf(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn zeros(&mut self, n: usize) -> Var {
        self.leaf(vec![0.0; n])
    }

    /// A whole parameter as a vector node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.value(id).to_vec(), Op::Param(id))
    }

    /// One row of a matrix parameter (an embedding lookup).
    pub fn row(&mut self, store: &ParamStore, table: ParamId, row: usize) -> Var {
        let p = store.get(table);
        let cols = p.cols();
        self.push(p.value[row * cols..(row + 1) * cols].to_vec(), Op::Row { table, row })
    }

    /// `W x` for a `[rows, cols]` parameter.
    pub fn matvec(&mut self, store: &ParamStore, w: ParamId, x: Var) -> Var {
        let p = store.get(w);
        let (rows, cols) = (p.rows(), p.cols());
        let xv = &self.nodes[x.0].value;
        assert_eq!(xv.len(), cols, "matvec {}: input has {} values, expected {cols}", p.name, xv.len());
        let out = (0..rows).map(|r| dot(&p.value[r * cols..(r + 1) * cols], xv)).collect();
        self.push(out, Op::MatVec { w, x })
    }

    fn zip_with(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.len(), bv.len(), "elementwise operands differ in length");
        let out = av.iter().zip(bv).map(|(&x, &y)| f(x, y)).collect();
        self.push(out, op)
    }

    fn map(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let out = self.nodes[x.0].value.iter().map(|&v| f(v)).collect();
        self.push(out, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Elementwise sum of equally sized nodes.
    pub fn sum(&mut self, xs: &[Var]) -> Var {
        assert!(!xs.is_empty());
        let mut out = self.nodes[xs[0].0].value.clone();
        for x in &xs[1..] {
            for (o, v) in out.iter_mut().zip(&self.nodes[x.0].value) {
                *o += v;
            }
        }
        self.push(out, Op::Sum(xs.to_vec()))
    }

    /// Scalar node `s` times vector `x`.
    pub fn scale(&mut self, s: Var, x: Var) -> Var {
        let sv = self.scalar(s);
        self.map(x, |v| sv * v, Op::Scale { s, x })
    }

    pub fn scale_const(&mut self, x: Var, c: f64) -> Var {
        self.map(x, |v| c * v, Op::ScaleConst { x, c })
    }

    pub fn add_const(&mut self, x: Var, c: f64) -> Var {
        self.map(x, |v| v + c, Op::AddConst(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.map(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.map(x, f64::tanh, Op::Tanh(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map(x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn ln(&mut self, x: Var) -> Var {
        self.map(x, f64::ln, Op::Ln(x))
    }

    pub fn concat(&mut self, xs: &[Var]) -> Var {
        let mut out = Vec::with_capacity(xs.iter().map(|x| self.dim(*x)).sum());
        for x in xs {
            out.extend_from_slice(&self.nodes[x.0].value);
        }
        self.push(out, Op::Concat(xs.to_vec()))
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Var {
        let out = self.nodes[x.0].value[start..start + len].to_vec();
        self.push(out, Op::Slice { x, start })
    }

    /// Element `index` of `x` as a length-1 node.
    pub fn pick(&mut self, x: Var, index: usize) -> Var {
        let v = self.nodes[x.0].value[index];
        self.push(vec![v], Op::Pick { x, index })
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let v = dot(&self.nodes[a.0].value, &self.nodes[b.0].value);
        self.push(vec![v], Op::Dot(a, b))
    }

    /// Softmax over the entries where `mask` is true (all entries without a
    /// mask). Masked entries are exactly 0. The caller must leave at least one
    /// entry unmasked.
    pub fn softmax(&mut self, x: Var, mask: Option<Vec<bool>>) -> Var {
        let xv = &self.nodes[x.0].value;
        let lse = log_sum_exp(xv, &mask);
        let out = xv
            .iter()
            .enumerate()
            .map(|(i, &v)| if masked(&mask, i) { 0.0 } else { (v - lse).exp() })
            .collect();
        self.push(out, Op::Softmax { x, mask })
    }

    /// Log of [`Tape::softmax`]; masked entries are `-inf`.
    pub fn log_softmax(&mut self, x: Var, mask: Option<Vec<bool>>) -> Var {
        let xv = &self.nodes[x.0].value;
        let lse = log_sum_exp(xv, &mask);
        let out = xv
            .iter()
            .enumerate()
            .map(|(i, &v)| if masked(&mask, i) { f64::NEG_INFINITY } else { v - lse })
            .collect();
        self.push(out, Op::LogSoftmax { x, mask })
    }

    /// `sum_j weights[j] * items[j]`.
    pub fn weighted_sum(&mut self, weights: Var, items: &[Var]) -> Var {
        let w = &self.nodes[weights.0].value;
        assert_eq!(w.len(), items.len());
        let mut out = vec![0.0; self.nodes[items[0].0].value.len()];
        for (wj, item) in w.iter().zip(items) {
            if *wj != 0.0 {
                axpy(&mut out, *wj, &self.nodes[item.0].value);
            }
        }
        self.push(out, Op::WeightedSum { weights, items: items.to_vec() })
    }

    /// `x / sqrt(|x|^2 + 1e-12)`.
    pub fn l2_normalize(&mut self, x: Var) -> Var {
        let xv = &self.nodes[x.0].value;
        let n = (dot(xv, xv) + NORM_EPS).sqrt();
        let out = xv.iter().map(|v| v / n).collect();
        self.push(out, Op::L2Normalize(x))
    }

    /// `sqrt(|x|^2 + 1e-12)` as a length-1 node.
    pub fn norm(&mut self, x: Var) -> Var {
        let xv = &self.nodes[x.0].value;
        let n = (dot(xv, xv) + NORM_EPS).sqrt();
        self.push(vec![n], Op::Norm(x))
    }

    /// Propagates `seed * d(loss)` back through the tape and adds parameter
    /// gradients into `store`. `loss` must be a length-1 node.
    pub fn backward(&self, loss: Var, seed: f64, store: &mut ParamStore) {
        assert_eq!(self.dim(loss), 1, "backward needs a scalar loss");
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![seed]);

        fn acc(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
            grads[v.0].get_or_insert_with(|| vec![0.0; len])
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let y = &node.value;
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => {
                    for (a, b) in store.get_mut(*id).grad.iter_mut().zip(&g) {
                        *a += b;
                    }
                }
                Op::Row { table, row } => {
                    let p = store.get_mut(*table);
                    let cols = p.cols();
                    for (a, b) in p.grad[row * cols..(row + 1) * cols].iter_mut().zip(&g) {
                        *a += b;
                    }
                }
                Op::MatVec { w, x } => {
                    let xv = &self.nodes[x.0].value;
                    let cols = xv.len();
                    let gx = acc(&mut grads, *x, cols);
                    let p = store.get_mut(*w);
                    for (r, &gr) in g.iter().enumerate() {
                        if gr == 0.0 {
                            continue;
                        }
                        axpy(&mut p.grad[r * cols..(r + 1) * cols], gr, xv);
                        axpy(gx, gr, &p.value[r * cols..(r + 1) * cols]);
                    }
                }
                Op::Add(a, b) => {
                    axpy(acc(&mut grads, *a, g.len()), 1.0, &g);
                    axpy(acc(&mut grads, *b, g.len()), 1.0, &g);
                }
                Op::Sub(a, b) => {
                    axpy(acc(&mut grads, *a, g.len()), 1.0, &g);
                    axpy(acc(&mut grads, *b, g.len()), -1.0, &g);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let ga: Vec<f64> = g.iter().zip(bv).map(|(x, y)| x * y).collect();
                    let gb: Vec<f64> = g.iter().zip(av).map(|(x, y)| x * y).collect();
                    axpy(acc(&mut grads, *a, g.len()), 1.0, &ga);
                    axpy(acc(&mut grads, *b, g.len()), 1.0, &gb);
                }
                Op::Sum(xs) => {
                    for x in xs {
                        axpy(acc(&mut grads, *x, g.len()), 1.0, &g);
                    }
                }
                Op::Scale { s, x } => {
                    let xv = &self.nodes[x.0].value;
                    let sv = self.nodes[s.0].value[0];
                    let gs = dot(&g, xv);
                    acc(&mut grads, *s, 1)[0] += gs;
                    axpy(acc(&mut grads, *x, g.len()), sv, &g);
                }
                Op::ScaleConst { x, c } => axpy(acc(&mut grads, *x, g.len()), *c, &g),
                Op::AddConst(x) => axpy(acc(&mut grads, *x, g.len()), 1.0, &g),
                Op::Sigmoid(x) => {
                    let gx = acc(&mut grads, *x, g.len());
                    for i in 0..g.len() {
                        gx[i] += g[i] * y[i] * (1.0 - y[i]);
                    }
                }
                Op::Tanh(x) => {
                    let gx = acc(&mut grads, *x, g.len());
                    for i in 0..g.len() {
                        gx[i] += g[i] * (1.0 - y[i] * y[i]);
                    }
                }
                Op::Relu(x) => {
                    let xv = &self.nodes[x.0].value;
                    let gx = acc(&mut grads, *x, g.len());
                    for i in 0..g.len() {
                        if xv[i] > 0.0 {
                            gx[i] += g[i];
                        }
                    }
                }
                Op::Ln(x) => {
                    let xv = &self.nodes[x.0].value;
                    let gx = acc(&mut grads, *x, g.len());
                    for i in 0..g.len() {
                        gx[i] += g[i] / xv[i];
                    }
                }
                Op::Concat(xs) => {
                    let mut off = 0;
                    for x in xs {
                        let n = self.dim(*x);
                        axpy(acc(&mut grads, *x, n), 1.0, &g[off..off + n]);
                        off += n;
                    }
                }
                Op::Slice { x, start } => {
                    let n = self.dim(*x);
                    axpy(&mut acc(&mut grads, *x, n)[*start..start + g.len()], 1.0, &g);
                }
                Op::Pick { x, index } => {
                    let n = self.dim(*x);
                    acc(&mut grads, *x, n)[*index] += g[0];
                }
                Op::Dot(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    axpy(acc(&mut grads, *a, av.len()), g[0], bv);
                    axpy(acc(&mut grads, *b, bv.len()), g[0], av);
                }
                Op::Softmax { x, mask } => {
                    // dx_i = y_i (g_i - sum_j g_j y_j); masked y_i are 0.
                    let s: f64 = dot(&g, y);
                    let gx = acc(&mut grads, *x, g.len());
                    for i in 0..g.len() {
                        if !masked(mask, i) {
                            gx[i] += y[i] * (g[i] - s);
                        }
                    }
                }
                Op::LogSoftmax { x, mask } => {
                    // dx_i = g_i - softmax_i * sum_j g_j over unmasked entries.
                    let total: f64 = (0..g.len()).filter(|&i| !masked(mask, i)).map(|i| g[i]).sum();
                    let gx = acc(&mut grads, *x, g.len());
                    for i in 0..g.len() {
                        if !masked(mask, i) {
                            gx[i] += g[i] - y[i].exp() * total;
                        }
                    }
                }
                Op::WeightedSum { weights, items } => {
                    let wv = &self.nodes[weights.0].value;
                    let mut gw = vec![0.0; items.len()];
                    for (j, item) in items.iter().enumerate() {
                        let iv = &self.nodes[item.0].value;
                        gw[j] = dot(&g, iv);
                        if wv[j] != 0.0 {
                            axpy(acc(&mut grads, *item, iv.len()), wv[j], &g);
                        }
                    }
                    axpy(acc(&mut grads, *weights, items.len()), 1.0, &gw);
                }
                Op::L2Normalize(x) => {
                    // y = x/n, dx = (g - y (g.y)) / n
                    let xv = &self.nodes[x.0].value;
                    let n = (dot(xv, xv) + NORM_EPS).sqrt();
                    let gy = dot(&g, y);
                    let gx = acc(&mut grads, *x, g.len());
                    for i in 0..g.len() {
                        gx[i] += (g[i] - y[i] * gy) / n;
                    }
                }
                Op::Norm(x) => {
                    let xv = &self.nodes[x.0].value;
                    let n = y[0];
                    axpy(acc(&mut grads, *x, xv.len()), g[0] / n, xv);
                }
            }
        }
    }
}
