//! Reverse-mode differentiation over tensor-level operations.
//!
//! A [`Tape`] records every operation as it is applied; [`Tape::backward`]
//! replays the record in reverse insertion order, accumulating gradients in a
//! fixed sequence so identical tapes yield bitwise-identical gradients. Every
//! op output is checked for NaN/infinity and fails fast.

use std::sync::Arc;

use crate::diffmath::Tensor;
use crate::graph::NormAdj;
use crate::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    /// Normalized adjacency times a dense matrix; adjacency values are constant.
    Spmm { adj: Arc<NormAdj>, x: NodeId },
    /// Per-edge scores `src[i] + dst[j]` over the adjacency pattern.
    EdgeScore { adj: Arc<NormAdj>, src: NodeId, dst: NodeId },
    /// Row-wise softmax of per-edge scores over each node's neighborhood.
    NeighborSoftmax { adj: Arc<NormAdj>, scores: NodeId },
    /// Aggregation with learned per-edge weights instead of adjacency values.
    EdgeSpmm { adj: Arc<NormAdj>, weights: NodeId, x: NodeId },
    AddRowBias { a: NodeId, bias: NodeId },
    Sigmoid(NodeId),
    Relu(NodeId),
    LeakyRelu { x: NodeId, slope: f64 },
    Ln(NodeId),
    Clamp { x: NodeId, lo: f64, hi: f64 },
    Abs(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    ScalarMul { x: NodeId, c: f64 },
    /// Shift by a constant; the constant is irrelevant to the backward pass.
    AddScalar(NodeId),
    /// Column-wise mean over a set of rows, producing `1 x cols`.
    MeanRows { x: NodeId, rows: Arc<Vec<usize>> },
    /// Row selection producing `len(rows) x cols`.
    GatherRows { x: NodeId, rows: Arc<Vec<usize>> },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Gradients keyed by the node they belong to.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }

    pub fn take(&mut self, id: NodeId) -> Option<Tensor> {
        self.grads[id.0].take()
    }
}

/// Records tensor operations and differentiates a scalar result.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Tape {
        Tape { nodes: Vec::new() }
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// A leaf that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push_leaf(value, false)
    }

    /// A leaf whose gradient is accumulated during [`Tape::backward`].
    pub fn parameter(&mut self, value: Tensor) -> NodeId {
        self.push_leaf(value, true)
    }

    fn push_leaf(&mut self, value: Tensor, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op, requires_grad: bool) -> Result<NodeId> {
        if !value.values_finite() {
            return Err(Error::NonFinite { op: op_name });
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.needs(a) || self.needs(b);
        self.push("matmul", value, Op::MatMul(a, b), rg)
    }

    pub fn spmm(&mut self, adj: &Arc<NormAdj>, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.rows() != adj.n() {
            return Err(Error::Shape {
                op: "spmm",
                detail: format!("adjacency is {0}x{0}, dense is {1}x{2}", adj.n(), xv.rows(), xv.cols()),
            });
        }
        let value = spmm_values(adj, adj.values(), xv);
        let rg = self.needs(x);
        self.push("spmm", value, Op::Spmm { adj: Arc::clone(adj), x }, rg)
    }

    pub fn edge_score(&mut self, adj: &Arc<NormAdj>, src: NodeId, dst: NodeId) -> Result<NodeId> {
        for (name, id) in [("src", src), ("dst", dst)] {
            let v = self.value(id);
            if v.shape() != (adj.n(), 1) {
                return Err(Error::Shape {
                    op: "edge_score",
                    detail: format!("{} must be {}x1, got {}x{}", name, adj.n(), v.rows(), v.cols()),
                });
            }
        }
        let sv = self.value(src).data();
        let dv = self.value(dst).data();
        let mut out = Vec::with_capacity(adj.nnz());
        for i in 0..adj.n() {
            let (cols, _) = adj.row(i);
            for &j in cols {
                out.push(sv[i] + dv[j]);
            }
        }
        let value = Tensor::from_vec(adj.nnz(), 1, out)?;
        let rg = self.needs(src) || self.needs(dst);
        self.push(
            "edge_score",
            value,
            Op::EdgeScore { adj: Arc::clone(adj), src, dst },
            rg,
        )
    }

    /// Softmax of per-edge scores within each row of the adjacency pattern.
    /// Output entries are positive and each row sums to 1.
    pub fn neighbor_softmax(&mut self, adj: &Arc<NormAdj>, scores: NodeId) -> Result<NodeId> {
        let sv = self.value(scores);
        if sv.shape() != (adj.nnz(), 1) {
            return Err(Error::Shape {
                op: "neighbor_softmax",
                detail: format!("scores must be {}x1, got {}x{}", adj.nnz(), sv.rows(), sv.cols()),
            });
        }
        let s = sv.data();
        let mut out = vec![0.0; adj.nnz()];
        for i in 0..adj.n() {
            let span = adj.indptr()[i]..adj.indptr()[i + 1];
            let row = &s[span.clone()];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for (o, &v) in out[span.clone()].iter_mut().zip(row) {
                *o = (v - max).exp();
                denom += *o;
            }
            for o in &mut out[span] {
                *o /= denom;
            }
        }
        let value = Tensor::from_vec(adj.nnz(), 1, out)?;
        let rg = self.needs(scores);
        self.push(
            "neighbor_softmax",
            value,
            Op::NeighborSoftmax { adj: Arc::clone(adj), scores },
            rg,
        )
    }

    pub fn edge_spmm(&mut self, adj: &Arc<NormAdj>, weights: NodeId, x: NodeId) -> Result<NodeId> {
        let wv = self.value(weights);
        let xv = self.value(x);
        if wv.shape() != (adj.nnz(), 1) || xv.rows() != adj.n() {
            return Err(Error::Shape {
                op: "edge_spmm",
                detail: format!(
                    "weights {}x{} (need {}x1), dense {}x{} (need {} rows)",
                    wv.rows(), wv.cols(), adj.nnz(), xv.rows(), xv.cols(), adj.n()
                ),
            });
        }
        let value = spmm_values(adj, wv.data(), xv);
        let rg = self.needs(weights) || self.needs(x);
        self.push(
            "edge_spmm",
            value,
            Op::EdgeSpmm { adj: Arc::clone(adj), weights, x },
            rg,
        )
    }

    pub fn add_row_bias(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let av = self.value(a);
        let bv = self.value(bias);
        if bv.shape() != (1, av.cols()) {
            return Err(Error::Shape {
                op: "add_row_bias",
                detail: format!("bias must be 1x{}, got {}x{}", av.cols(), bv.rows(), bv.cols()),
            });
        }
        let mut value = av.clone();
        let cols = value.cols();
        for i in 0..value.rows() {
            let row = &mut value.data_mut()[i * cols..(i + 1) * cols];
            for (o, b) in row.iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        let rg = self.needs(a) || self.needs(bias);
        self.push("add_row_bias", value, Op::AddRowBias { a, bias }, rg)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        let value = self.map_unary(x, |v| {
            if v >= 0.0 {
                1.0 / (1.0 + (-v).exp())
            } else {
                let e = v.exp();
                e / (1.0 + e)
            }
        });
        let rg = self.needs(x);
        self.push("sigmoid", value, Op::Sigmoid(x), rg)
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        let value = self.map_unary(x, |v| if v > 0.0 { v } else { 0.0 });
        let rg = self.needs(x);
        self.push("relu", value, Op::Relu(x), rg)
    }

    pub fn leaky_relu(&mut self, x: NodeId, slope: f64) -> Result<NodeId> {
        if !slope.is_finite() {
            return Err(Error::Invalid("leaky_relu slope must be finite".into()));
        }
        let value = self.map_unary(x, |v| if v > 0.0 { v } else { slope * v });
        let rg = self.needs(x);
        self.push("leaky_relu", value, Op::LeakyRelu { x, slope }, rg)
    }

    pub fn ln(&mut self, x: NodeId) -> Result<NodeId> {
        let value = self.map_unary(x, f64::ln);
        let rg = self.needs(x);
        self.push("ln", value, Op::Ln(x), rg)
    }

    pub fn clamp(&mut self, x: NodeId, lo: f64, hi: f64) -> Result<NodeId> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Invalid(format!("bad clamp range [{}, {}]", lo, hi)));
        }
        let value = self.map_unary(x, |v| v.clamp(lo, hi));
        let rg = self.needs(x);
        self.push("clamp", value, Op::Clamp { x, lo, hi }, rg)
    }

    pub fn abs(&mut self, x: NodeId) -> Result<NodeId> {
        let value = self.map_unary(x, f64::abs);
        let rg = self.needs(x);
        self.push("abs", value, Op::Abs(x), rg)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.zip_binary("add", a, b, |x, y| x + y)?;
        let rg = self.needs(a) || self.needs(b);
        self.push("add", value, Op::Add(a, b), rg)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.zip_binary("sub", a, b, |x, y| x - y)?;
        let rg = self.needs(a) || self.needs(b);
        self.push("sub", value, Op::Sub(a, b), rg)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.zip_binary("mul", a, b, |x, y| x * y)?;
        let rg = self.needs(a) || self.needs(b);
        self.push("mul", value, Op::Mul(a, b), rg)
    }

    pub fn scalar_mul(&mut self, x: NodeId, c: f64) -> Result<NodeId> {
        if !c.is_finite() {
            return Err(Error::Invalid("scalar_mul factor must be finite".into()));
        }
        let value = self.map_unary(x, |v| c * v);
        let rg = self.needs(x);
        self.push("scalar_mul", value, Op::ScalarMul { x, c }, rg)
    }

    pub fn add_scalar(&mut self, x: NodeId, c: f64) -> Result<NodeId> {
        if !c.is_finite() {
            return Err(Error::Invalid("add_scalar addend must be finite".into()));
        }
        let value = self.map_unary(x, |v| c + v);
        let rg = self.needs(x);
        self.push("add_scalar", value, Op::AddScalar(x), rg)
    }

    pub fn mean_rows(&mut self, x: NodeId, rows: &[usize]) -> Result<NodeId> {
        let rows = self.check_rows("mean_over_index_set", x, rows)?;
        let xv = self.value(x);
        let cols = xv.cols();
        let mut acc = vec![0.0; cols];
        for &r in rows.iter() {
            for (a, v) in acc.iter_mut().zip(xv.row(r)) {
                *a += v;
            }
        }
        let k = rows.len() as f64;
        let value = Tensor::from_vec(1, cols, acc.into_iter().map(|v| v / k).collect())?;
        let rg = self.needs(x);
        self.push("mean_over_index_set", value, Op::MeanRows { x, rows }, rg)
    }

    pub fn gather_rows(&mut self, x: NodeId, rows: &[usize]) -> Result<NodeId> {
        let rows = self.check_rows("gather_rows", x, rows)?;
        let xv = self.value(x);
        let cols = xv.cols();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for &r in rows.iter() {
            data.extend_from_slice(xv.row(r));
        }
        let value = Tensor::from_vec(rows.len(), cols, data)?;
        let rg = self.needs(x);
        self.push("gather_rows", value, Op::GatherRows { x, rows }, rg)
    }

    fn check_rows(&self, op: &'static str, x: NodeId, rows: &[usize]) -> Result<Arc<Vec<usize>>> {
        if rows.is_empty() {
            return Err(Error::Invalid(format!("{}: empty index set", op)));
        }
        let n = self.value(x).rows();
        if let Some(&r) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::Invalid(format!("{}: row {} out of 0..{}", op, r, n)));
        }
        Ok(Arc::new(rows.to_vec()))
    }

    fn map_unary(&self, x: NodeId, f: impl Fn(f64) -> f64) -> Tensor {
        let xv = self.value(x);
        let data = xv.data().iter().map(|&v| f(v)).collect();
        Tensor::from_vec(xv.rows(), xv.cols(), data).unwrap_or_else(|_| {
            // Non-finite results are caught by `push`; reconstruct raw.
            let mut t = Tensor::zeros(xv.rows(), xv.cols());
            for (o, &v) in t.data_mut().iter_mut().zip(xv.data()) {
                *o = f(v);
            }
            t
        })
    }

    fn zip_binary(
        &self,
        op: &'static str,
        a: NodeId,
        b: NodeId,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let av = self.value(a);
        let bv = self.value(b);
        if av.shape() != bv.shape() {
            return Err(Error::Shape {
                op,
                detail: format!("{}x{} vs {}x{}", av.rows(), av.cols(), bv.rows(), bv.cols()),
            });
        }
        let mut out = Tensor::zeros(av.rows(), av.cols());
        for ((o, x), y) in out.data_mut().iter_mut().zip(av.data()).zip(bv.data()) {
            *o = f(*x, *y);
        }
        Ok(out)
    }

    /// Reverse pass from a `1x1` loss node. Returns per-node gradients for
    /// every node on a gradient path; others stay `None`.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.value(loss).shape() != (1, 1) {
            let (r, c) = self.value(loss).shape();
            return Err(Error::Shape {
                op: "backward",
                detail: format!("loss must be 1x1, got {}x{}", r, c),
            });
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::from_vec(1, 1, vec![1.0]).unwrap());
        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                grads[idx] = None;
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], id: NodeId, delta: Tensor) {
        if !self.nodes[id.0].requires_grad {
            return;
        }
        match &mut grads[id.0] {
            Some(t) => t.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        }
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.needs(*a) {
                    let da = g.matmul_nt(self.value(*b)).expect("backward matmul_nt");
                    self.accumulate(grads, *a, da);
                }
                if self.needs(*b) {
                    let db = self.value(*a).matmul_tn(g).expect("backward matmul_tn");
                    self.accumulate(grads, *b, db);
                }
            }
            Op::Spmm { adj, x } => {
                if self.needs(*x) {
                    self.accumulate(grads, *x, spmm_transpose(adj, adj.values(), g));
                }
            }
            Op::EdgeScore { adj, src, dst } => {
                let need_src = self.needs(*src);
                let need_dst = self.needs(*dst);
                let mut dsrc = Tensor::zeros(adj.n(), 1);
                let mut ddst = Tensor::zeros(adj.n(), 1);
                for i in 0..adj.n() {
                    let span = adj.indptr()[i]..adj.indptr()[i + 1];
                    for (offset, &j) in adj.indices()[span.clone()].iter().enumerate() {
                        let ge = g.data()[span.start + offset];
                        dsrc.data_mut()[i] += ge;
                        ddst.data_mut()[j] += ge;
                    }
                }
                if need_src {
                    self.accumulate(grads, *src, dsrc);
                }
                if need_dst {
                    self.accumulate(grads, *dst, ddst);
                }
            }
            Op::NeighborSoftmax { adj, scores } => {
                if self.needs(*scores) {
                    let att = &self.nodes[idx].value;
                    let mut ds = Tensor::zeros(adj.nnz(), 1);
                    for i in 0..adj.n() {
                        let span = adj.indptr()[i]..adj.indptr()[i + 1];
                        let mut dot = 0.0;
                        for e in span.clone() {
                            dot += g.data()[e] * att.data()[e];
                        }
                        for e in span {
                            ds.data_mut()[e] = att.data()[e] * (g.data()[e] - dot);
                        }
                    }
                    self.accumulate(grads, *scores, ds);
                }
            }
            Op::EdgeSpmm { adj, weights, x } => {
                let xv = self.value(*x);
                let cols = xv.cols();
                if self.needs(*weights) {
                    let mut dw = Tensor::zeros(adj.nnz(), 1);
                    for i in 0..adj.n() {
                        let span = adj.indptr()[i]..adj.indptr()[i + 1];
                        let grow = g.row(i);
                        for (offset, &j) in adj.indices()[span.clone()].iter().enumerate() {
                            let mut acc = 0.0;
                            for (gv, xvj) in grow.iter().zip(xv.row(j)) {
                                acc += gv * xvj;
                            }
                            dw.data_mut()[span.start + offset] = acc;
                        }
                    }
                    self.accumulate(grads, *weights, dw);
                }
                if self.needs(*x) {
                    let wv = self.value(*weights);
                    let mut dx = Tensor::zeros(adj.n(), cols);
                    for i in 0..adj.n() {
                        let span = adj.indptr()[i]..adj.indptr()[i + 1];
                        let grow = g.row(i);
                        for (offset, &j) in adj.indices()[span.clone()].iter().enumerate() {
                            let w = wv.data()[span.start + offset];
                            let drow = &mut dx.data_mut()[j * cols..(j + 1) * cols];
                            for (d, gv) in drow.iter_mut().zip(grow) {
                                *d += w * gv;
                            }
                        }
                    }
                    self.accumulate(grads, *x, dx);
                }
            }
            Op::AddRowBias { a, bias } => {
                if self.needs(*a) {
                    self.accumulate(grads, *a, g.clone());
                }
                if self.needs(*bias) {
                    let cols = g.cols();
                    let mut db = Tensor::zeros(1, cols);
                    for i in 0..g.rows() {
                        for (d, gv) in db.data_mut().iter_mut().zip(g.row(i)) {
                            *d += gv;
                        }
                    }
                    self.accumulate(grads, *bias, db);
                }
            }
            Op::Sigmoid(x) => {
                if self.needs(*x) {
                    let y = &self.nodes[idx].value;
                    let dx = elementwise(g, y, |gv, yv| gv * yv * (1.0 - yv));
                    self.accumulate(grads, *x, dx);
                }
            }
            Op::Relu(x) => {
                if self.needs(*x) {
                    let xv = self.value(*x);
                    let dx = elementwise(g, xv, |gv, v| if v > 0.0 { gv } else { 0.0 });
                    self.accumulate(grads, *x, dx);
                }
            }
            Op::LeakyRelu { x, slope } => {
                if self.needs(*x) {
                    let xv = self.value(*x);
                    let s = *slope;
                    let dx = elementwise(g, xv, |gv, v| if v > 0.0 { gv } else { s * gv });
                    self.accumulate(grads, *x, dx);
                }
            }
            Op::Ln(x) => {
                if self.needs(*x) {
                    let xv = self.value(*x);
                    let dx = elementwise(g, xv, |gv, v| gv / v);
                    self.accumulate(grads, *x, dx);
                }
            }
            Op::Clamp { x, lo, hi } => {
                if self.needs(*x) {
                    let xv = self.value(*x);
                    let (lo, hi) = (*lo, *hi);
                    let dx = elementwise(g, xv, |gv, v| if v > lo && v < hi { gv } else { 0.0 });
                    self.accumulate(grads, *x, dx);
                }
            }
            Op::Abs(x) => {
                if self.needs(*x) {
                    let xv = self.value(*x);
                    let dx = elementwise(g, xv, |gv, v| {
                        if v > 0.0 {
                            gv
                        } else if v < 0.0 {
                            -gv
                        } else {
                            0.0
                        }
                    });
                    self.accumulate(grads, *x, dx);
                }
            }
            Op::Add(a, b) => {
                if self.needs(*a) {
                    self.accumulate(grads, *a, g.clone());
                }
                if self.needs(*b) {
                    self.accumulate(grads, *b, g.clone());
                }
            }
            Op::Sub(a, b) => {
                if self.needs(*a) {
                    self.accumulate(grads, *a, g.clone());
                }
                if self.needs(*b) {
                    let mut neg = g.clone();
                    for v in neg.data_mut() {
                        *v = -*v;
                    }
                    self.accumulate(grads, *b, neg);
                }
            }
            Op::Mul(a, b) => {
                if self.needs(*a) {
                    let da = elementwise(g, self.value(*b), |gv, bv| gv * bv);
                    self.accumulate(grads, *a, da);
                }
                if self.needs(*b) {
                    let db = elementwise(g, self.value(*a), |gv, av| gv * av);
                    self.accumulate(grads, *b, db);
                }
            }
            Op::ScalarMul { x, c } => {
                if self.needs(*x) {
                    let c = *c;
                    let mut dx = g.clone();
                    for v in dx.data_mut() {
                        *v *= c;
                    }
                    self.accumulate(grads, *x, dx);
                }
            }
            Op::AddScalar(x) => {
                if self.needs(*x) {
                    self.accumulate(grads, *x, g.clone());
                }
            }
            Op::MeanRows { x, rows } => {
                if self.needs(*x) {
                    let xv = self.value(*x);
                    let cols = xv.cols();
                    let k = rows.len() as f64;
                    let mut dx = Tensor::zeros(xv.rows(), cols);
                    for &r in rows.iter() {
                        let drow = &mut dx.data_mut()[r * cols..(r + 1) * cols];
                        for (d, gv) in drow.iter_mut().zip(g.row(0)) {
                            *d += gv / k;
                        }
                    }
                    self.accumulate(grads, *x, dx);
                }
            }
            Op::GatherRows { x, rows } => {
                if self.needs(*x) {
                    let xv = self.value(*x);
                    let cols = xv.cols();
                    let mut dx = Tensor::zeros(xv.rows(), cols);
                    for (t, &r) in rows.iter().enumerate() {
                        let drow = &mut dx.data_mut()[r * cols..(r + 1) * cols];
                        for (d, gv) in drow.iter_mut().zip(g.row(t)) {
                            *d += gv;
                        }
                    }
                    self.accumulate(grads, *x, dx);
                }
            }
        }
    }
}

fn elementwise(g: &Tensor, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    debug_assert_eq!(g.shape(), other.shape());
    let mut out = Tensor::zeros(g.rows(), g.cols());
    for ((o, gv), ov) in out.data_mut().iter_mut().zip(g.data()).zip(other.data()) {
        *o = f(*gv, *ov);
    }
    out
}

/// `out[i, :] = sum_e vals[e] * x[col(e), :]` over the pattern rows.
fn spmm_values(adj: &NormAdj, vals: &[f64], x: &Tensor) -> Tensor {
    let cols = x.cols();
    let mut out = Tensor::zeros(adj.n(), cols);
    for i in 0..adj.n() {
        let span = adj.indptr()[i]..adj.indptr()[i + 1];
        let orow = &mut out.data_mut()[i * cols..(i + 1) * cols];
        for (offset, &j) in adj.indices()[span.clone()].iter().enumerate() {
            let w = vals[span.start + offset];
            for (o, xv) in orow.iter_mut().zip(x.row(j)) {
                *o += w * xv;
            }
        }
    }
    out
}

/// Transpose-scatter of the same kernel: `out[col(e), :] += vals[e] * g[row(e), :]`.
fn spmm_transpose(adj: &NormAdj, vals: &[f64], g: &Tensor) -> Tensor {
    let cols = g.cols();
    let mut out = Tensor::zeros(adj.n(), cols);
    for i in 0..adj.n() {
        let span = adj.indptr()[i]..adj.indptr()[i + 1];
        let grow = g.row(i);
        for (offset, &j) in adj.indices()[span.clone()].iter().enumerate() {
            let w = vals[span.start + offset];
            let orow = &mut out.data_mut()[j * cols..(j + 1) * cols];
            for (o, gv) in orow.iter_mut().zip(grow) {
                *o += w * gv;
            }
        }
    }
    out
}
