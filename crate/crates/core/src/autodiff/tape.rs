//! Fixed-graph reverse-mode differentiation.
//!
//! A [`Tape`] records one node per operation in evaluation order. Every
//! operation carries its own backward rule, so the graph is a flat list and the
//! reverse sweep is a single pass from the loss back to the parameters.

use std::sync::Arc;

use super::gemm::{gemm, Layout};
use super::optim::{Gradients, ParamId, ParamStore};
use super::sparse::LinearMap;
use super::tensor::DiffTensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Clone, Debug)]
pub enum Op {
    Constant,
    Param(ParamId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// `scale·x + shift`
    Affine { x: NodeId, scale: f64, shift: f64 },
    Square(NodeId),
    Gelu(NodeId),
    /// Pointwise channel mixing `[n, c_in]·[c_in, c_out] + bias`.
    Linear {
        x: NodeId,
        weight: NodeId,
        bias: Option<NodeId>,
    },
    /// Mean over every entry, producing a scalar.
    Mean(NodeId),
    /// Fixed linear map applied to every channel.
    Map { x: NodeId, map: Arc<dyn LinearMap> },
    /// Channel concatenation of two `[n, _]` tensors.
    Concat(NodeId, NodeId),
    /// Channel mixing inside each of `weights.len()` stacked subbands.
    ///
    /// The input is `[S·P, c]`; subband `s` is multiplied by its own weight,
    /// either shared over positions (`[c, c]`) or per position (`[P, c, c]`).
    SubbandMix { x: NodeId, weights: Vec<NodeId> },
}

struct Node {
    value: Option<DiffTensor>,
    op: Op,
    needs_grad: bool,
}

pub struct Tape<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
}

const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_C: f64 = 0.044_715;

/// GELU, tanh form.
pub fn gelu(x: f64) -> f64 {
    let inner = GELU_K * (x + GELU_C * x * x * x);
    0.5 * x * (1.0 + fast_tanh(inner))
}

/// `tanh` through one `exp`, absolute error within a few ulps of one.
#[inline]
fn fast_tanh(x: f64) -> f64 {
    if x.abs() > 20.0 {
        return x.signum();
    }
    1.0 - 2.0 / ((2.0 * x).exp() + 1.0)
}

pub fn gelu_derivative(x: f64) -> f64 {
    let inner = GELU_K * (x + GELU_C * x * x * x);
    let t = fast_tanh(inner);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_K * (1.0 + 3.0 * GELU_C * x * x)
}

impl<'s> Tape<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Self {
            store,
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &DiffTensor {
        let node = &self.nodes[id.0];
        match (&node.value, &node.op) {
            (Some(v), _) => v,
            (None, Op::Param(p)) => self.store.get(*p).tensor(),
            (None, _) => unreachable!("non-parameter node without value"),
        }
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.value(id).values()[0]
    }

    pub fn constant(&mut self, t: DiffTensor) -> NodeId {
        self.push(Some(t), Op::Constant, false)
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        self.push(None, Op::Param(id), true)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.op_forward(Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.op_forward(Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.op_forward(Op::Mul(a, b))
    }

    pub fn affine(&mut self, x: NodeId, scale: f64, shift: f64) -> Result<NodeId> {
        self.op_forward(Op::Affine { x, scale, shift })
    }

    pub fn scale(&mut self, x: NodeId, scale: f64) -> Result<NodeId> {
        self.affine(x, scale, 0.0)
    }

    pub fn square(&mut self, x: NodeId) -> Result<NodeId> {
        self.op_forward(Op::Square(x))
    }

    pub fn gelu(&mut self, x: NodeId) -> Result<NodeId> {
        self.op_forward(Op::Gelu(x))
    }

    pub fn linear(&mut self, x: NodeId, weight: NodeId, bias: Option<NodeId>) -> Result<NodeId> {
        self.op_forward(Op::Linear { x, weight, bias })
    }

    pub fn mean(&mut self, x: NodeId) -> Result<NodeId> {
        self.op_forward(Op::Mean(x))
    }

    pub fn map(&mut self, x: NodeId, map: Arc<dyn LinearMap>) -> Result<NodeId> {
        self.op_forward(Op::Map { x, map })
    }

    pub fn concat(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.op_forward(Op::Concat(a, b))
    }

    pub fn subband_mix(&mut self, x: NodeId, weights: Vec<NodeId>) -> Result<NodeId> {
        self.op_forward(Op::SubbandMix { x, weights })
    }

    /// Mean of squared entries.
    pub fn mean_square(&mut self, x: NodeId) -> Result<NodeId> {
        let sq = self.square(x)?;
        self.mean(sq)
    }

    fn push(&mut self, value: Option<DiffTensor>, op: Op, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::shape(op, sa, sb));
        }
        Ok(())
    }

    /// Evaluates `op`, records it, and returns the new node.
    pub fn op_forward(&mut self, op: Op) -> Result<NodeId> {
        let (value, name, needs_grad) = match &op {
            Op::Constant | Op::Param(_) => {
                return Err(Error::InvalidArgument(
                    "leaf nodes are created with constant() / param()".into(),
                ))
            }
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => {
                self.same_shape("elementwise", *a, *b)?;
                let (va, vb) = (self.value(*a), self.value(*b));
                let out: Vec<f64> = match &op {
                    Op::Add(..) => va.values().iter().zip(vb.values()).map(|(x, y)| x + y).collect(),
                    Op::Sub(..) => va.values().iter().zip(vb.values()).map(|(x, y)| x - y).collect(),
                    _ => va.values().iter().zip(vb.values()).map(|(x, y)| x * y).collect(),
                };
                let name = match &op {
                    Op::Add(..) => "add",
                    Op::Sub(..) => "sub",
                    _ => "mul",
                };
                (
                    DiffTensor::new(va.shape().to_vec(), out)?,
                    name,
                    self.needs(*a) || self.needs(*b),
                )
            }
            Op::Affine { x, scale, shift } => {
                let v = self.value(*x);
                let out = v.values().iter().map(|t| scale * t + shift).collect();
                (DiffTensor::new(v.shape().to_vec(), out)?, "affine", self.needs(*x))
            }
            Op::Square(x) => {
                let v = self.value(*x);
                let out = v.values().iter().map(|t| t * t).collect();
                (DiffTensor::new(v.shape().to_vec(), out)?, "square", self.needs(*x))
            }
            Op::Gelu(x) => {
                let v = self.value(*x);
                let out = v.values().iter().map(|&t| gelu(t)).collect();
                (DiffTensor::new(v.shape().to_vec(), out)?, "gelu", self.needs(*x))
            }
            Op::Linear { x, weight, bias } => {
                let (vx, vw) = (self.value(*x), self.value(*weight));
                let (n, cin) = (vx.rows(), vx.cols());
                if vw.shape().len() != 2 || vw.shape()[0] != cin {
                    return Err(Error::shape("linear", &[cin, 0], vw.shape()));
                }
                let cout = vw.shape()[1];
                let mut out = vec![0.0; n * cout];
                if let Some(b) = bias {
                    let vb = self.value(*b);
                    if vb.len() != cout {
                        return Err(Error::shape("linear bias", &[cout], vb.shape()));
                    }
                    for row in out.chunks_exact_mut(cout) {
                        row.copy_from_slice(vb.values());
                    }
                }
                let beta = if bias.is_some() { 1.0 } else { 0.0 };
                gemm(
                    n,
                    cin,
                    cout,
                    1.0,
                    vx.values(),
                    Layout::Normal,
                    vw.values(),
                    Layout::Normal,
                    beta,
                    &mut out,
                );
                let needs = self.needs(*x) || self.needs(*weight) || bias.is_some_and(|b| self.needs(b));
                (DiffTensor::new(vec![n, cout], out)?, "linear", needs)
            }
            Op::Mean(x) => {
                let v = self.value(*x);
                let m = v.values().iter().sum::<f64>() / v.len() as f64;
                (DiffTensor::scalar(m), "mean", self.needs(*x))
            }
            Op::Map { x, map } => {
                let v = self.value(*x);
                let width = v.cols();
                if v.rows() != map.input_len() {
                    return Err(Error::shape("map", &[map.input_len(), width], v.shape()));
                }
                let mut out = vec![0.0; map.output_len() * width];
                map.apply(v.values(), width, &mut out);
                (
                    DiffTensor::new(vec![map.output_len(), width], out)?,
                    "map",
                    self.needs(*x),
                )
            }
            Op::Concat(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if va.rows() != vb.rows() {
                    return Err(Error::shape("concat", &[va.rows()], &[vb.rows()]));
                }
                let (ca, cb) = (va.cols(), vb.cols());
                let mut out = Vec::with_capacity(va.rows() * (ca + cb));
                for (ra, rb) in va.values().chunks_exact(ca).zip(vb.values().chunks_exact(cb)) {
                    out.extend_from_slice(ra);
                    out.extend_from_slice(rb);
                }
                (
                    DiffTensor::new(vec![va.rows(), ca + cb], out)?,
                    "concat",
                    self.needs(*a) || self.needs(*b),
                )
            }
            Op::SubbandMix { x, weights } => {
                let v = self.value(*x);
                let c = v.cols();
                let nsub = weights.len();
                if nsub == 0 || !v.rows().is_multiple_of(nsub) {
                    return Err(Error::shape("subband_mix", &[nsub], v.shape()));
                }
                let p = v.rows() / nsub;
                let mut out = vec![0.0; v.len()];
                let mut needs = self.needs(*x);
                for (s, w) in weights.iter().enumerate() {
                    needs |= self.needs(*w);
                    let vw = self.value(*w);
                    let block = &v.values()[s * p * c..(s + 1) * p * c];
                    let dst = &mut out[s * p * c..(s + 1) * p * c];
                    match vw.shape() {
                        [a, b] if *a == c && *b == c => {
                            gemm(p, c, c, 1.0, block, Layout::Normal, vw.values(), Layout::Normal, 0.0, dst);
                        }
                        [pp, a, b] if *pp == p && *a == c && *b == c => {
                            for pos in 0..p {
                                let r = &vw.values()[pos * c * c..(pos + 1) * c * c];
                                gemm(
                                    1,
                                    c,
                                    c,
                                    1.0,
                                    &block[pos * c..(pos + 1) * c],
                                    Layout::Normal,
                                    r,
                                    Layout::Normal,
                                    0.0,
                                    &mut dst[pos * c..(pos + 1) * c],
                                );
                            }
                        }
                        other => return Err(Error::shape("subband_mix weight", &[c, c], other)),
                    }
                }
                (DiffTensor::new(v.shape().to_vec(), out)?, "subband_mix", needs)
            }
        };
        if !value.all_finite() {
            return Err(Error::NonFinite { op: name });
        }
        let value = value.with_requires_grad(needs_grad);
        Ok(self.push(Some(value), op, needs_grad))
    }

    /// Reverse sweep from a scalar `loss`; returns `∂loss/∂θ` for every
    /// parameter in the store (zero for parameters the loss does not reach).
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::NotScalar(lv.shape().to_vec()));
        }
        let mut grads = self.store.zero_grads();
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = adj[idx].take() else { continue };
            match &node.op {
                Op::Constant => {}
                Op::Param(p) => {
                    for (dst, src) in grads.get_mut(*p).iter_mut().zip(&g) {
                        *dst += src;
                    }
                }
                Op::Add(a, b) => {
                    self.accumulate(&mut adj, *a, |d| add_into(d, &g));
                    self.accumulate(&mut adj, *b, |d| add_into(d, &g));
                }
                Op::Sub(a, b) => {
                    self.accumulate(&mut adj, *a, |d| add_into(d, &g));
                    self.accumulate(&mut adj, *b, |d| {
                        for (x, y) in d.iter_mut().zip(&g) {
                            *x -= y;
                        }
                    });
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(*a).values(), self.value(*b).values());
                    self.accumulate(&mut adj, *a, |d| {
                        for ((x, gi), bi) in d.iter_mut().zip(&g).zip(vb) {
                            *x += gi * bi;
                        }
                    });
                    self.accumulate(&mut adj, *b, |d| {
                        for ((x, gi), ai) in d.iter_mut().zip(&g).zip(va) {
                            *x += gi * ai;
                        }
                    });
                }
                Op::Affine { x, scale, .. } => {
                    self.accumulate(&mut adj, *x, |d| {
                        for (t, gi) in d.iter_mut().zip(&g) {
                            *t += scale * gi;
                        }
                    });
                }
                Op::Square(x) => {
                    let vx = self.value(*x).values();
                    self.accumulate(&mut adj, *x, |d| {
                        for ((t, gi), xi) in d.iter_mut().zip(&g).zip(vx) {
                            *t += 2.0 * xi * gi;
                        }
                    });
                }
                Op::Gelu(x) => {
                    let vx = self.value(*x).values();
                    self.accumulate(&mut adj, *x, |d| {
                        for ((t, gi), &xi) in d.iter_mut().zip(&g).zip(vx) {
                            *t += gi * gelu_derivative(xi);
                        }
                    });
                }
                Op::Linear { x, weight, bias } => {
                    let (vx, vw) = (self.value(*x), self.value(*weight));
                    let (n, cin, cout) = (vx.rows(), vx.cols(), vw.shape()[1]);
                    self.accumulate(&mut adj, *x, |d| {
                        gemm(n, cout, cin, 1.0, &g, Layout::Normal, vw.values(), Layout::Transposed, 1.0, d);
                    });
                    self.accumulate(&mut adj, *weight, |d| {
                        gemm(cin, n, cout, 1.0, vx.values(), Layout::Transposed, &g, Layout::Normal, 1.0, d);
                    });
                    if let Some(b) = bias {
                        self.accumulate(&mut adj, *b, |d| {
                            for row in g.chunks_exact(cout) {
                                add_into(d, row);
                            }
                        });
                    }
                }
                Op::Mean(x) => {
                    let n = self.value(*x).len() as f64;
                    let gi = g[0] / n;
                    self.accumulate(&mut adj, *x, |d| {
                        for t in d.iter_mut() {
                            *t += gi;
                        }
                    });
                }
                Op::Map { x, map } => {
                    let width = self.value(*x).cols();
                    let mut back = vec![0.0; map.input_len() * width];
                    map.apply_adjoint(&g, width, &mut back);
                    self.accumulate(&mut adj, *x, |d| add_into(d, &back));
                }
                Op::Concat(a, b) => {
                    let (ca, cb) = (self.value(*a).cols(), self.value(*b).cols());
                    self.accumulate(&mut adj, *a, |d| {
                        for (dst, src) in d.chunks_exact_mut(ca).zip(g.chunks_exact(ca + cb)) {
                            add_into(dst, &src[..ca]);
                        }
                    });
                    self.accumulate(&mut adj, *b, |d| {
                        for (dst, src) in d.chunks_exact_mut(cb).zip(g.chunks_exact(ca + cb)) {
                            add_into(dst, &src[ca..]);
                        }
                    });
                }
                Op::SubbandMix { x, weights } => {
                    let vx = self.value(*x);
                    let c = vx.cols();
                    let p = vx.rows() / weights.len();
                    for (s, w) in weights.iter().enumerate() {
                        let vw = self.value(*w);
                        let span = s * p * c..(s + 1) * p * c;
                        let gs = &g[span.clone()];
                        let xs = &vx.values()[span.clone()];
                        let shared = vw.shape().len() == 2;
                        self.accumulate(&mut adj, *x, |d| {
                            let d = &mut d[span.clone()];
                            if shared {
                                gemm(p, c, c, 1.0, gs, Layout::Normal, vw.values(), Layout::Transposed, 1.0, d);
                            } else {
                                for pos in 0..p {
                                    let r = &vw.values()[pos * c * c..(pos + 1) * c * c];
                                    gemm(
                                        1,
                                        c,
                                        c,
                                        1.0,
                                        &gs[pos * c..(pos + 1) * c],
                                        Layout::Normal,
                                        r,
                                        Layout::Transposed,
                                        1.0,
                                        &mut d[pos * c..(pos + 1) * c],
                                    );
                                }
                            }
                        });
                        self.accumulate(&mut adj, *w, |d| {
                            if shared {
                                gemm(c, p, c, 1.0, xs, Layout::Transposed, gs, Layout::Normal, 1.0, d);
                            } else {
                                for pos in 0..p {
                                    gemm(
                                        c,
                                        1,
                                        c,
                                        1.0,
                                        &xs[pos * c..(pos + 1) * c],
                                        Layout::Transposed,
                                        &gs[pos * c..(pos + 1) * c],
                                        Layout::Normal,
                                        1.0,
                                        &mut d[pos * c * c..(pos + 1) * c * c],
                                    );
                                }
                            }
                        });
                    }
                }
            }
        }
        Ok(grads)
    }

    fn accumulate(&self, adj: &mut [Option<Vec<f64>>], id: NodeId, f: impl FnOnce(&mut [f64])) {
        if !self.needs(id) {
            return;
        }
        let slot = &mut adj[id.0];
        let buf = slot.get_or_insert_with(|| vec![0.0; self.value(id).len()]);
        f(buf);
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::autodiff::SparseMatrix;

    fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> DiffTensor {
        let n = shape.iter().product();
        DiffTensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Central-difference check of every parameter entry of `store`.
    fn fd_check(store: &mut ParamStore, build: impl Fn(&mut Tape) -> NodeId) -> f64 {
        let grads = {
            let mut tape = Tape::new(store);
            let loss = build(&mut tape);
            tape.backward(loss).unwrap()
        };
        let eval = |s: &ParamStore| {
            let mut tape = Tape::new(s);
            let loss = build(&mut tape);
            tape.scalar(loss)
        };
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            for k in 0..store.values(id).len() {
                let orig = store.values(id)[k];
                store.values_mut(id)[k] = orig + h;
                let up = eval(store);
                store.values_mut(id)[k] = orig - h;
                let down = eval(store);
                store.values_mut(id)[k] = orig;
                let fd = (up - down) / (2.0 * h);
                let an = grads.get(id)[k];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-3);
                worst = worst.max(rel);
            }
        }
        worst
    }

    #[test]
    fn elementwise_forward_examples() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let a = tape.constant(DiffTensor::new(vec![2], vec![1.0, 2.0]).unwrap());
        let b = tape.constant(DiffTensor::new(vec![2], vec![3.0, 4.0]).unwrap());
        let s = tape.add(a, b).unwrap();
        assert_eq!(tape.value(s).values(), &[4.0, 6.0]);
        let z = tape.constant(DiffTensor::scalar(0.0));
        let g = tape.gelu(z).unwrap();
        assert_eq!(tape.scalar(g), 0.0);
        let ones = tape.constant(DiffTensor::new(vec![4, 4], vec![1.0; 16]).unwrap());
        let m = tape.mean(ones).unwrap();
        assert_eq!(tape.scalar(m), 1.0);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let a = tape.constant(DiffTensor::zeros(vec![2]));
        let b = tape.constant(DiffTensor::zeros(vec![3]));
        assert!(matches!(tape.add(a, b), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn non_finite_output_is_reported() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let a = tape.constant(DiffTensor::scalar(1e300));
        assert!(matches!(tape.square(a), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn hand_derivative_of_mean_square() {
        // loss = mean((w·x)^2), w = 1, x = 2 → dloss/dw = 2·w·x² = 8
        let mut store = ParamStore::new();
        let w = store.insert("w", DiffTensor::scalar(1.0)).unwrap();
        let mut tape = Tape::new(&store);
        let wn = tape.param(w);
        let x = tape.constant(DiffTensor::scalar(2.0));
        let wx = tape.mul(wn, x).unwrap();
        let loss = tape.mean_square(wx).unwrap();
        let g = tape.backward(loss).unwrap();
        assert!((g.get(w)[0] - 8.0).abs() < 1e-15);
    }

    #[test]
    fn disconnected_parameter_has_zero_grad() {
        let mut store = ParamStore::new();
        let w = store.insert("w", DiffTensor::scalar(3.0)).unwrap();
        let p = store.insert("p", DiffTensor::scalar(5.0)).unwrap();
        let mut tape = Tape::new(&store);
        let wn = tape.param(w);
        let loss = tape.mean_square(wn).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(p), &[0.0]);
    }

    #[test]
    fn backward_requires_scalar() {
        let mut store = ParamStore::new();
        let w = store.insert("w", DiffTensor::zeros(vec![3])).unwrap();
        let mut tape = Tape::new(&store);
        let wn = tape.param(w);
        assert!(matches!(tape.backward(wn), Err(Error::NotScalar(_))));
    }

    #[test]
    fn gradient_check_every_op() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut store = ParamStore::new();
        let x = store.insert("x", random_tensor(&mut rng, vec![6, 3])).unwrap();
        let w = store.insert("w", random_tensor(&mut rng, vec![3, 4])).unwrap();
        let b = store.insert("b", random_tensor(&mut rng, vec![4])).unwrap();
        let r_shared = store.insert("r", random_tensor(&mut rng, vec![4, 4])).unwrap();
        let r_pos = store.insert("rp", random_tensor(&mut rng, vec![3, 4, 4])).unwrap();
        let y = store.insert("y", random_tensor(&mut rng, vec![6, 2])).unwrap();
        let sparse = Arc::new(
            SparseMatrix::from_triplets(
                5,
                6,
                &[(0, 0, 1.0), (0, 1, -2.0), (1, 2, 0.5), (2, 3, 1.5), (3, 4, -1.0), (4, 5, 2.0), (4, 0, 0.3)],
            )
            .unwrap(),
        );
        let build = |tape: &mut Tape| {
            let (xn, wn, bn) = (tape.param(x), tape.param(w), tape.param(b));
            let (rs, rp, yn) = (tape.param(r_shared), tape.param(r_pos), tape.param(y));
            let h = tape.linear(xn, wn, Some(bn)).unwrap();
            let h = tape.gelu(h).unwrap();
            let mixed = tape.subband_mix(h, vec![rs, rp]).unwrap();
            let h2 = tape.mul(mixed, h).unwrap();
            let h3 = tape.affine(h2, 0.7, 0.1).unwrap();
            let h4 = tape.sub(h3, h).unwrap();
            let cat = tape.concat(h4, yn).unwrap();
            let mapped = tape.map(cat, sparse.clone()).unwrap();
            let sq = tape.square(mapped).unwrap();
            let s = tape.add(sq, mapped).unwrap();
            tape.mean(s).unwrap()
        };
        let worst = fd_check(&mut store, build);
        assert!(worst < 1e-5, "worst relative error {worst}");
    }

    #[test]
    fn map_backward_is_the_transpose() {
        // ⟨Ax, y⟩ = ⟨x, Aᵀy⟩
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let triplets: Vec<_> = (0..40)
            .map(|_| (rng.random_range(0..7), rng.random_range(0..9), rng.random_range(-1.0..1.0)))
            .collect();
        let a = SparseMatrix::from_triplets(7, 9, &triplets).unwrap();
        let x: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut ax = vec![0.0; 7];
        a.apply(&x, 1, &mut ax);
        let mut aty = vec![0.0; 9];
        a.apply_adjoint(&y, 1, &mut aty);
        let lhs: f64 = ax.iter().zip(&y).map(|(p, q)| p * q).sum();
        let rhs: f64 = x.iter().zip(&aty).map(|(p, q)| p * q).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn fast_tanh_matches_library() {
        for i in -3000..=3000 {
            let x = i as f64 * 0.01;
            assert!((fast_tanh(x) - x.tanh()).abs() <= 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn gelu_derivative_matches_difference() {
        for i in -40..=40 {
            let x = i as f64 * 0.1;
            let fd = (gelu(x + 1e-6) - gelu(x - 1e-6)) / 2e-6;
            assert!((fd - gelu_derivative(x)).abs() < 1e-8);
        }
    }
}
