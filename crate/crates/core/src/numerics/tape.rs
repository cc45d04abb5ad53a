//! Reverse-mode differentiation over 2-d [`Tensor`] values.
//!
//! Every value recorded on a [`Tape`] is a matrix. Nodes are appended in
//! evaluation order, so the node index is already a topological order and
//! [`Var::backward`] visits each node once, last to first.
//!
//! Shape mismatches inside tape ops are programming errors and panic; the
//! public entry points that build graphs validate their inputs first.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

use super::tensor::{matmul_into, Tensor};
use crate::entmax::{self, Alpha};

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044_715;

#[derive(Debug)]
enum Op {
    Leaf,
    Const,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddRow(usize, usize),
    Scale(usize, f64),
    ScaleBy(usize, usize),
    MulConst(usize, Rc<Tensor>),
    Gelu(usize),
    LayerNorm {
        x: usize,
        gain: usize,
        bias: usize,
        xhat: Tensor,
        inv_std: Vec<f64>,
    },
    EntmaxRows(usize, Alpha),
    Transpose(usize),
    GatherRows(usize, Vec<usize>),
    ConcatRows(Vec<usize>),
    ConcatCols(Vec<usize>),
    SliceCols(usize, usize, usize),
    Reshape(usize),
    Sum(usize),
    MeanRows(usize),
    Mse(usize, Rc<Tensor>),
    Pinball(usize, Rc<Tensor>, f64),
    Entropy(usize),
}

#[derive(Debug)]
struct Node {
    value: Rc<Tensor>,
    op: Op,
}

/// Records primal values and the ops that produced them.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    params: RefCell<BTreeMap<String, usize>>,
}

/// Handle to a value on a [`Tape`].
#[derive(Clone, Copy, Debug)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: usize,
}

fn as_matrix(t: &Tensor) -> Tensor {
    if t.shape().len() == 2 {
        t.clone()
    } else {
        t.reshape(&[t.rows(), t.cols()]).expect("same element count")
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            op,
        });
        Var {
            tape: self,
            idx: nodes.len() - 1,
        }
    }

    /// Differentiable input.
    pub fn var(&self, value: &Tensor) -> Var<'_> {
        self.push(as_matrix(value), Op::Leaf)
    }

    /// Differentiable input tracked under `name`; re-binding a name returns
    /// the existing node.
    pub fn param(&self, name: &str, value: &Tensor) -> Var<'_> {
        if let Some(&idx) = self.params.borrow().get(name) {
            return Var { tape: self, idx };
        }
        let v = self.var(value);
        self.params.borrow_mut().insert(name.to_string(), v.idx);
        v
    }

    /// Non-differentiable input.
    pub fn constant(&self, value: &Tensor) -> Var<'_> {
        self.push(as_matrix(value), Op::Const)
    }

    fn value_of(&self, idx: usize) -> Rc<Tensor> {
        self.nodes.borrow()[idx].value.clone()
    }

    /// Stacks the rows of several values.
    pub fn concat_rows<'t>(&'t self, parts: &[Var<'t>]) -> Var<'t> {
        assert!(!parts.is_empty(), "concat_rows of nothing");
        let vals: Vec<_> = parts.iter().map(|p| p.value()).collect();
        let c = vals[0].cols();
        let mut data = Vec::new();
        let mut r = 0;
        for v in &vals {
            assert_eq!(v.cols(), c, "concat_rows column mismatch");
            data.extend_from_slice(v.data());
            r += v.rows();
        }
        let t = Tensor::new(&[r, c], data).expect("concat shape");
        self.push(t, Op::ConcatRows(parts.iter().map(|p| p.idx).collect()))
    }

    /// Joins several values side by side.
    pub fn concat_cols<'t>(&'t self, parts: &[Var<'t>]) -> Var<'t> {
        assert!(!parts.is_empty(), "concat_cols of nothing");
        let vals: Vec<_> = parts.iter().map(|p| p.value()).collect();
        let r = vals[0].rows();
        let total: usize = vals.iter().map(|v| v.cols()).sum();
        let mut data = Vec::with_capacity(r * total);
        for i in 0..r {
            for v in &vals {
                assert_eq!(v.rows(), r, "concat_cols row mismatch");
                data.extend_from_slice(v.row(i));
            }
        }
        let t = Tensor::new(&[r, total], data).expect("concat shape");
        self.push(t, Op::ConcatCols(parts.iter().map(|p| p.idx).collect()))
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> Rc<Tensor> {
        self.tape.value_of(self.idx)
    }

    pub fn shape(&self) -> (usize, usize) {
        let v = self.value();
        (v.rows(), v.cols())
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    fn unary(&self, value: Tensor, op: Op) -> Var<'t> {
        self.tape.push(value, op)
    }

    pub fn matmul(&self, other: &Var<'t>) -> Var<'t> {
        let a = self.value();
        let b = other.value();
        let c = a.matmul(&b).expect("matmul shapes");
        self.unary(c, Op::MatMul(self.idx, other.idx))
    }

    pub fn add(&self, other: &Var<'t>) -> Var<'t> {
        let c = self.value().add(&other.value()).expect("add shapes");
        self.unary(c, Op::Add(self.idx, other.idx))
    }

    pub fn sub(&self, other: &Var<'t>) -> Var<'t> {
        let c = self.value().sub(&other.value()).expect("sub shapes");
        self.unary(c, Op::Sub(self.idx, other.idx))
    }

    /// Elementwise product.
    pub fn mul(&self, other: &Var<'t>) -> Var<'t> {
        let c = self
            .value()
            .zip_map(&other.value(), |a, b| a * b)
            .expect("mul shapes");
        self.unary(c, Op::Mul(self.idx, other.idx))
    }

    /// Adds a `1×n` row to every row.
    pub fn add_row(&self, row: &Var<'t>) -> Var<'t> {
        let a = self.value();
        let b = row.value();
        assert_eq!(b.rows(), 1, "add_row expects a single row");
        assert_eq!(a.cols(), b.cols(), "add_row width mismatch");
        let mut out = (*a).clone();
        let c = a.cols();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            *v += b.data()[i % c];
        }
        self.unary(out, Op::AddRow(self.idx, row.idx))
    }

    pub fn scale(&self, s: f64) -> Var<'t> {
        self.unary(self.value().scale(s), Op::Scale(self.idx, s))
    }

    /// Multiplies by a `1×1` value on the tape.
    pub fn scale_by(&self, s: &Var<'t>) -> Var<'t> {
        let sv = s.value();
        assert_eq!(sv.len(), 1, "scale_by expects a scalar");
        self.unary(self.value().scale(sv.data()[0]), Op::ScaleBy(self.idx, s.idx))
    }

    /// Elementwise product with a constant (e.g. a dropout mask).
    pub fn mul_const(&self, mask: Tensor) -> Var<'t> {
        let mask = Rc::new(as_matrix(&mask));
        let c = self
            .value()
            .zip_map(&mask, |a, b| a * b)
            .expect("mul_const shapes");
        self.unary(c, Op::MulConst(self.idx, mask))
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&self) -> Var<'t> {
        let out = self.value().map(|x| {
            let u = GELU_C * (x + GELU_K * x * x * x);
            0.5 * x * (1.0 + u.tanh())
        });
        self.unary(out, Op::Gelu(self.idx))
    }

    /// Normalizes each row to zero mean and unit variance, then applies
    /// `gain` and `bias` (both `1×d`).
    pub fn layer_norm(&self, gain: &Var<'t>, bias: &Var<'t>, eps: f64) -> Var<'t> {
        let x = self.value();
        let (r, d) = (x.rows(), x.cols());
        let g = gain.value();
        let b = bias.value();
        assert_eq!(g.len(), d, "layer_norm gain width");
        assert_eq!(b.len(), d, "layer_norm bias width");
        let mut xhat = vec![0.0; r * d];
        let mut inv_std = vec![0.0; r];
        let mut out = vec![0.0; r * d];
        for i in 0..r {
            let row = x.row(i);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + eps).sqrt();
            inv_std[i] = inv;
            for j in 0..d {
                let h = (row[j] - mean) * inv;
                xhat[i * d + j] = h;
                out[i * d + j] = h * g.data()[j] + b.data()[j];
            }
        }
        let xhat = Tensor::new(&[r, d], xhat).expect("xhat");
        let out = Tensor::new(&[r, d], out).expect("ln out");
        self.unary(
            out,
            Op::LayerNorm {
                x: self.idx,
                gain: gain.idx,
                bias: bias.idx,
                xhat,
                inv_std,
            },
        )
    }

    /// α-EntMax applied to each row independently.
    pub fn entmax_rows(&self, alpha: Alpha) -> Var<'t> {
        let z = self.value();
        let mut data = Vec::with_capacity(z.len());
        for i in 0..z.rows() {
            data.extend(entmax::entmax_unchecked(z.row(i), alpha));
        }
        let out = Tensor::new(&[z.rows(), z.cols()], data).expect("entmax shape");
        self.unary(out, Op::EntmaxRows(self.idx, alpha))
    }

    pub fn transpose(&self) -> Var<'t> {
        self.unary(self.value().transpose(), Op::Transpose(self.idx))
    }

    /// Selects rows by index; indices may repeat.
    pub fn gather_rows(&self, idx: &[usize]) -> Var<'t> {
        let x = self.value();
        let c = x.cols();
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            data.extend_from_slice(x.row(i));
        }
        let t = Tensor::new(&[idx.len(), c], data).expect("gather shape");
        self.unary(t, Op::GatherRows(self.idx, idx.to_vec()))
    }

    pub fn rows_range(&self, start: usize, end: usize) -> Var<'t> {
        let idx: Vec<usize> = (start..end).collect();
        self.gather_rows(&idx)
    }

    pub fn slice_cols(&self, start: usize, end: usize) -> Var<'t> {
        let x = self.value();
        assert!(start < end && end <= x.cols(), "slice_cols bounds");
        let mut data = Vec::with_capacity(x.rows() * (end - start));
        for i in 0..x.rows() {
            data.extend_from_slice(&x.row(i)[start..end]);
        }
        let t = Tensor::new(&[x.rows(), end - start], data).expect("slice shape");
        self.unary(t, Op::SliceCols(self.idx, start, end))
    }

    pub fn reshape(&self, rows: usize, cols: usize) -> Var<'t> {
        let t = self.value().reshape(&[rows, cols]).expect("reshape count");
        self.unary(t, Op::Reshape(self.idx))
    }

    pub fn sum(&self) -> Var<'t> {
        self.unary(Tensor::scalar(self.value().sum()), Op::Sum(self.idx))
    }

    /// Column means as a `1×n` row.
    pub fn mean_rows(&self) -> Var<'t> {
        let x = self.value();
        let (r, c) = (x.rows(), x.cols());
        let mut out = vec![0.0; c];
        for i in 0..r {
            for (o, v) in out.iter_mut().zip(x.row(i)) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o /= r as f64);
        self.unary(Tensor::new(&[1, c], out).expect("mean"), Op::MeanRows(self.idx))
    }

    /// Mean squared error against a constant target.
    pub fn mse(&self, target: &Tensor) -> Var<'t> {
        let x = self.value();
        assert_eq!(x.len(), target.len(), "mse length");
        let n = x.len() as f64;
        let v = x
            .data()
            .iter()
            .zip(target.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n;
        self.unary(Tensor::scalar(v), Op::Mse(self.idx, Rc::new(target.clone())))
    }

    /// Mean pinball loss at quantile `tau` against a constant target.
    pub fn pinball(&self, target: &Tensor, tau: f64) -> Var<'t> {
        let x = self.value();
        assert_eq!(x.len(), target.len(), "pinball length");
        let n = x.len() as f64;
        let v = x
            .data()
            .iter()
            .zip(target.data())
            .map(|(yh, y)| pinball_point(*y - *yh, tau))
            .sum::<f64>()
            / n;
        self.unary(
            Tensor::scalar(v),
            Op::Pinball(self.idx, Rc::new(target.clone()), tau),
        )
    }

    /// Shannon entropy `−Σ p ln p` over all entries (zeros contribute 0).
    pub fn entropy(&self) -> Var<'t> {
        let v = -self
            .value()
            .data()
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>();
        self.unary(Tensor::scalar(v), Op::Entropy(self.idx))
    }

    /// Back-propagates from this (single-element) value.
    pub fn backward(&self) -> Gradients {
        let nodes = self.tape.nodes.borrow();
        assert_eq!(nodes[self.idx].value.len(), 1, "backward from non-scalar");
        let mut grads: Vec<Option<Tensor>> = vec![None; self.idx + 1];
        grads[self.idx] = Some(Tensor::full(nodes[self.idx].value.shape(), 1.0));

        for i in (0..=self.idx).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &nodes[i];
            backprop(&nodes, node, &g, &mut grads);
            grads[i] = Some(g);
        }
        let params = self
            .tape
            .params
            .borrow()
            .iter()
            .map(|(k, &v)| (k.clone(), v))
            .collect();
        Gradients { grads, params }
    }
}

pub(crate) fn pinball_point(err: f64, tau: f64) -> f64 {
    // err = y − ŷ
    (tau * err).max((tau - 1.0) * err)
}

fn acc(grads: &mut [Option<Tensor>], idx: usize, g: Tensor) {
    match &mut grads[idx] {
        Some(existing) => existing.accumulate(&g),
        slot @ None => *slot = Some(g),
    }
}

fn backprop(nodes: &[Node], node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
    let val = |i: usize| nodes[i].value.clone();
    match &node.op {
        Op::Leaf | Op::Const => {}
        Op::MatMul(a, b) => {
            let av = val(*a);
            let bv = val(*b);
            let (m, k, n) = (av.rows(), av.cols(), bv.cols());
            // dA = G · Bᵀ, dB = Aᵀ · G
            let bt = bv.transpose();
            let mut da = vec![0.0; m * k];
            matmul_into(g.data(), bt.data(), &mut da, m, n, k);
            let at = av.transpose();
            let mut db = vec![0.0; k * n];
            matmul_into(at.data(), g.data(), &mut db, k, m, n);
            acc(grads, *a, Tensor::new(&[m, k], da).unwrap());
            acc(grads, *b, Tensor::new(&[k, n], db).unwrap());
        }
        Op::Add(a, b) => {
            acc(grads, *a, g.clone());
            acc(grads, *b, g.clone());
        }
        Op::Sub(a, b) => {
            acc(grads, *a, g.clone());
            acc(grads, *b, g.scale(-1.0));
        }
        Op::Mul(a, b) => {
            let av = val(*a);
            let bv = val(*b);
            acc(grads, *a, g.zip_map(&bv, |x, y| x * y).unwrap());
            acc(grads, *b, g.zip_map(&av, |x, y| x * y).unwrap());
        }
        Op::AddRow(a, b) => {
            acc(grads, *a, g.clone());
            let c = g.cols();
            let mut db = vec![0.0; c];
            for (i, v) in g.data().iter().enumerate() {
                db[i % c] += v;
            }
            acc(grads, *b, Tensor::new(&[1, c], db).unwrap());
        }
        Op::Scale(a, s) => acc(grads, *a, g.scale(*s)),
        Op::ScaleBy(a, s) => {
            let av = val(*a);
            let sv = val(*s).data()[0];
            acc(grads, *a, g.scale(sv));
            let ds: f64 = g.data().iter().zip(av.data()).map(|(x, y)| x * y).sum();
            acc(grads, *s, Tensor::scalar(ds));
        }
        Op::MulConst(a, mask) => acc(grads, *a, g.zip_map(mask, |x, m| x * m).unwrap()),
        Op::Gelu(a) => {
            let av = val(*a);
            let d = g
                .zip_map(&av, |gi, x| {
                    let u = GELU_C * (x + GELU_K * x * x * x);
                    let t = u.tanh();
                    let du = GELU_C * (1.0 + 3.0 * GELU_K * x * x);
                    gi * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)
                })
                .unwrap();
            acc(grads, *a, d);
        }
        Op::LayerNorm {
            x,
            gain,
            bias,
            xhat,
            inv_std,
        } => {
            let gv = val(*gain);
            let (r, d) = (xhat.rows(), xhat.cols());
            let mut dx = vec![0.0; r * d];
            let mut dg = vec![0.0; d];
            let mut db = vec![0.0; d];
            for i in 0..r {
                let gr = g.row(i);
                let hr = xhat.row(i);
                let mut sum_dh = 0.0;
                let mut sum_dh_h = 0.0;
                for j in 0..d {
                    let dh = gr[j] * gv.data()[j];
                    sum_dh += dh;
                    sum_dh_h += dh * hr[j];
                    dg[j] += gr[j] * hr[j];
                    db[j] += gr[j];
                }
                let n = d as f64;
                for j in 0..d {
                    let dh = gr[j] * gv.data()[j];
                    dx[i * d + j] = inv_std[i] / n * (n * dh - sum_dh - hr[j] * sum_dh_h);
                }
            }
            acc(grads, *x, Tensor::new(&[r, d], dx).unwrap());
            let gshape = gv.shape().to_vec();
            acc(grads, *gain, Tensor::new(&gshape, dg).unwrap());
            acc(grads, *bias, Tensor::new(&gshape, db).unwrap());
        }
        Op::EntmaxRows(a, alpha) => {
            let p = &node.value;
            let mut data = Vec::with_capacity(p.len());
            for i in 0..p.rows() {
                data.extend(entmax::entmax_backward(p.row(i), g.row(i), *alpha));
            }
            acc(grads, *a, Tensor::new(&[p.rows(), p.cols()], data).unwrap());
        }
        Op::Transpose(a) => acc(grads, *a, g.transpose()),
        Op::GatherRows(a, idx) => {
            let av = val(*a);
            let c = av.cols();
            let mut d = Tensor::zeros(&[av.rows(), c]);
            for (k, &i) in idx.iter().enumerate() {
                let src = g.row(k);
                for (o, v) in d.data_mut()[i * c..(i + 1) * c].iter_mut().zip(src) {
                    *o += v;
                }
            }
            acc(grads, *a, d);
        }
        Op::ConcatRows(parts) => {
            let c = g.cols();
            let mut off = 0;
            for &p in parts {
                let r = nodes[p].value.rows();
                let data = g.data()[off * c..(off + r) * c].to_vec();
                acc(grads, p, Tensor::new(&[r, c], data).unwrap());
                off += r;
            }
        }
        Op::ConcatCols(parts) => {
            let r = g.rows();
            let mut off = 0;
            for &p in parts {
                let c = nodes[p].value.cols();
                let mut data = Vec::with_capacity(r * c);
                for i in 0..r {
                    data.extend_from_slice(&g.row(i)[off..off + c]);
                }
                acc(grads, p, Tensor::new(&[r, c], data).unwrap());
                off += c;
            }
        }
        Op::SliceCols(a, start, end) => {
            let av = val(*a);
            let c = av.cols();
            let mut d = Tensor::zeros(&[av.rows(), c]);
            for i in 0..av.rows() {
                d.data_mut()[i * c + start..i * c + end].copy_from_slice(g.row(i));
            }
            acc(grads, *a, d);
        }
        Op::Reshape(a) => {
            let av = val(*a);
            acc(grads, *a, g.reshape(av.shape()).unwrap());
        }
        Op::Sum(a) => {
            let av = val(*a);
            acc(grads, *a, Tensor::full(av.shape(), g.data()[0]));
        }
        Op::MeanRows(a) => {
            let av = val(*a);
            let r = av.rows();
            let c = av.cols();
            let mut d = Vec::with_capacity(r * c);
            for _ in 0..r {
                d.extend(g.data().iter().map(|v| v / r as f64));
            }
            acc(grads, *a, Tensor::new(&[r, c], d).unwrap());
        }
        Op::Mse(a, target) => {
            let av = val(*a);
            let n = av.len() as f64;
            let s = g.data()[0];
            let d: Vec<f64> = av
                .data()
                .iter()
                .zip(target.data())
                .map(|(x, y)| s * 2.0 * (x - y) / n)
                .collect();
            acc(grads, *a, Tensor::new(av.shape(), d).unwrap());
        }
        Op::Pinball(a, target, tau) => {
            let av = val(*a);
            let n = av.len() as f64;
            let s = g.data()[0];
            let d: Vec<f64> = av
                .data()
                .iter()
                .zip(target.data())
                .map(|(yh, y)| {
                    let e = y - yh;
                    let de = if e >= 0.0 { *tau } else { tau - 1.0 };
                    -s * de / n
                })
                .collect();
            acc(grads, *a, Tensor::new(av.shape(), d).unwrap());
        }
        Op::Entropy(a) => {
            let av = val(*a);
            let s = g.data()[0];
            let d = av.map(|p| if p > 0.0 { -s * (p.ln() + 1.0) } else { 0.0 });
            acc(grads, *a, d);
        }
    }
}

/// Result of a backward pass.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: BTreeMap<String, usize>,
}

impl Gradients {
    /// Gradient for a value, `None` when it does not influence the output.
    pub fn get(&self, v: &Var<'_>) -> Option<&Tensor> {
        self.grads.get(v.idx).and_then(Option::as_ref)
    }

    /// Gradients of every named parameter that influenced the output.
    pub fn params(&self) -> BTreeMap<String, Tensor> {
        self.params
            .iter()
            .filter_map(|(name, &idx)| {
                self.grads
                    .get(idx)
                    .and_then(Option::as_ref)
                    .map(|g| (name.clone(), g.clone()))
            })
            .collect()
    }
}
