//! Minimal reverse-mode differentiation over a closed set of primitives.
//!
//! The tape records exactly the operations the backbone and losses need:
//! matmul, add, scale (by a constant or by a 1x1 node), bias-add, relu,
//! sigmoid, softmax cross-entropy, squared Frobenius norm, and Frobenius
//! cosine. There is no graph compiler and no control flow; shapes are fixed
//! when a node is recorded, and leaf values can be swapped between forward
//! passes as long as the shape is preserved.
//!
//! Conventions: batches are column-major (one sample per column), the
//! backward root must be a 1x1 scalar, and the relu subgradient at exactly
//! zero is 0.

use crate::error::{Error, Result};
use crate::linalg::{frobenius_inner, Matrix};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    /// External value; `trainable` marks parameters whose gradients are kept.
    Leaf { trainable: bool },
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    ScaleConst(NodeId, f64),
    /// Elementwise scale of the first operand by a 1x1 scalar node.
    ScaleBy(NodeId, NodeId),
    /// `x + b` with `b` a column vector broadcast over the columns of `x`.
    BiasAdd(NodeId, NodeId),
    Relu(NodeId),
    Sigmoid(NodeId),
    /// Mean negative log-likelihood of `labels` under column-wise softmax.
    SoftmaxCrossEntropy(NodeId, Vec<usize>),
    FrobNormSq(NodeId),
    FrobCosine(NodeId, NodeId),
}

struct Node {
    op: Op,
    value: Matrix,
    grad: Matrix,
}

/// Guard below which Frobenius-cosine is defined as 0 with zero gradient.
pub const COSINE_NORM_FLOOR: f64 = 1e-12;

/// Recorded computation with per-node values and gradients.
pub struct Tape {
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, op: Op, shape: (usize, usize)) -> NodeId {
        let value = Matrix::zeros(shape.0, shape.1).expect("node shapes are validated positive");
        let grad = value.clone();
        self.nodes.push(Node { op, value, grad });
        NodeId(self.nodes.len() - 1)
    }

    fn shape(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].value.shape()
    }

    fn node_err(&self, at: usize, op: &str, msg: String) -> Error {
        Error::Shape(format!("{op} (node {at}): {msg}"))
    }

    /// Non-trainable leaf (inputs, frozen weights, snapshots).
    pub fn input(&mut self, value: Matrix) -> NodeId {
        let shape = value.shape();
        let id = self.push(Op::Leaf { trainable: false }, shape);
        self.nodes[id.0].value = value;
        id
    }

    /// Trainable leaf; `backward` accumulates its gradient.
    pub fn param(&mut self, value: Matrix) -> NodeId {
        let shape = value.shape();
        let id = self.push(Op::Leaf { trainable: true }, shape);
        self.nodes[id.0].value = value;
        id
    }

    /// Replace a leaf value; the shape must match the recorded one.
    pub fn set_value(&mut self, id: NodeId, value: Matrix) -> Result<()> {
        match self.nodes[id.0].op {
            Op::Leaf { .. } => {}
            _ => {
                return Err(Error::Contract(format!(
                    "set_value on non-leaf node {}",
                    id.0
                )))
            }
        }
        if value.shape() != self.shape(id) {
            return Err(self.node_err(
                id.0,
                "set_value",
                format!(
                    "expected {}x{}, got {}x{}",
                    self.shape(id).0,
                    self.shape(id).1,
                    value.rows(),
                    value.cols()
                ),
            ));
        }
        self.nodes[id.0].value = value;
        Ok(())
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        if ac != br {
            return Err(self.node_err(
                self.nodes.len(),
                "matmul",
                format!("{ar}x{ac} * {br}x{bc}"),
            ));
        }
        Ok(self.push(Op::MatMul(a, b), (ar, bc)))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let sa = self.shape(a);
        let sb = self.shape(b);
        if sa != sb {
            return Err(self.node_err(
                self.nodes.len(),
                "add",
                format!("{}x{} vs {}x{}", sa.0, sa.1, sb.0, sb.1),
            ));
        }
        Ok(self.push(Op::Add(a, b), sa))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let shape = self.shape(a);
        self.push(Op::ScaleConst(a, c), shape)
    }

    pub fn scale_by(&mut self, a: NodeId, s: NodeId) -> Result<NodeId> {
        if self.shape(s) != (1, 1) {
            let (r, c) = self.shape(s);
            return Err(self.node_err(
                self.nodes.len(),
                "scale_by",
                format!("scalar operand must be 1x1, got {r}x{c}"),
            ));
        }
        let shape = self.shape(a);
        Ok(self.push(Op::ScaleBy(a, s), shape))
    }

    pub fn bias_add(&mut self, x: NodeId, b: NodeId) -> Result<NodeId> {
        let (xr, xc) = self.shape(x);
        let (br, bc) = self.shape(b);
        if bc != 1 || br != xr {
            return Err(self.node_err(
                self.nodes.len(),
                "bias_add",
                format!("bias {br}x{bc} does not broadcast over {xr}x{xc}"),
            ));
        }
        Ok(self.push(Op::BiasAdd(x, b), (xr, xc)))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let shape = self.shape(x);
        self.push(Op::Relu(x), shape)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let shape = self.shape(x);
        self.push(Op::Sigmoid(x), shape)
    }

    /// Mean softmax cross-entropy of `logits` (classes x batch) against one
    /// label per column.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, labels: Vec<usize>) -> Result<NodeId> {
        let (classes, batch) = self.shape(logits);
        if labels.len() != batch {
            return Err(self.node_err(
                self.nodes.len(),
                "softmax_cross_entropy",
                format!("{} labels for batch of {batch}", labels.len()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Data(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        Ok(self.push(Op::SoftmaxCrossEntropy(logits, labels), (1, 1)))
    }

    /// Swap the labels of a recorded cross-entropy node (batch replacement).
    pub fn set_labels(&mut self, id: NodeId, labels: Vec<usize>) -> Result<()> {
        let (classes, batch) = match self.nodes[id.0].op {
            Op::SoftmaxCrossEntropy(logits, _) => self.shape(logits),
            _ => {
                return Err(Error::Contract(format!(
                    "set_labels on non-cross-entropy node {}",
                    id.0
                )))
            }
        };
        if labels.len() != batch {
            return Err(Error::Data(format!(
                "{} labels for batch of {batch}",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Data(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        if let Op::SoftmaxCrossEntropy(_, stored) = &mut self.nodes[id.0].op {
            *stored = labels;
        }
        Ok(())
    }

    pub fn frobenius_norm_sq(&mut self, x: NodeId) -> NodeId {
        let _ = self.shape(x);
        self.push(Op::FrobNormSq(x), (1, 1))
    }

    pub fn frobenius_cosine(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let sa = self.shape(a);
        let sb = self.shape(b);
        if sa != sb {
            return Err(self.node_err(
                self.nodes.len(),
                "frobenius_cosine",
                format!("{}x{} vs {}x{}", sa.0, sa.1, sb.0, sb.1),
            ));
        }
        Ok(self.push(Op::FrobCosine(a, b), (1, 1)))
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    pub fn grad(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].grad
    }

    pub fn is_trainable(&self, id: NodeId) -> bool {
        matches!(self.nodes[id.0].op, Op::Leaf { trainable: true })
    }

    /// Recompute all node values up to and including `root` and return the
    /// root value. Intermediates are cached for `backward`.
    pub fn forward(&mut self, root: NodeId) -> Result<&Matrix> {
        for i in 0..=root.0 {
            let value = match &self.nodes[i].op {
                Op::Leaf { .. } => continue,
                Op::MatMul(a, b) => self.nodes[a.0].value.matmul(&self.nodes[b.0].value)?,
                Op::Add(a, b) => self.nodes[a.0].value.add(&self.nodes[b.0].value)?,
                Op::ScaleConst(a, c) => self.nodes[a.0].value.scale(*c),
                Op::ScaleBy(a, s) => {
                    let c = self.nodes[s.0].value.get(0, 0);
                    self.nodes[a.0].value.scale(c)
                }
                Op::BiasAdd(x, b) => {
                    let x = &self.nodes[x.0].value;
                    let b = &self.nodes[b.0].value;
                    let mut out = x.clone();
                    for r in 0..out.rows() {
                        let bv = b.get(r, 0);
                        for c in 0..out.cols() {
                            out.set(r, c, out.get(r, c) + bv);
                        }
                    }
                    out
                }
                Op::Relu(x) => self.nodes[x.0].value.map(|v| if v > 0.0 { v } else { 0.0 }),
                Op::Sigmoid(x) => self.nodes[x.0].value.map(sigmoid),
                Op::SoftmaxCrossEntropy(logits, labels) => {
                    let z = &self.nodes[logits.0].value;
                    let mut total = 0.0;
                    for (col, &label) in labels.iter().enumerate() {
                        let (max, logsum) = column_logsumexp(z, col);
                        total += logsum + max - z.get(label, col);
                    }
                    Matrix::scalar(total / labels.len() as f64)
                }
                Op::FrobNormSq(x) => Matrix::scalar(self.nodes[x.0].value.frobenius_norm_sq()),
                Op::FrobCosine(a, b) => {
                    let x = &self.nodes[a.0].value;
                    let y = &self.nodes[b.0].value;
                    let nx = x.frobenius_norm();
                    let ny = y.frobenius_norm();
                    if nx < COSINE_NORM_FLOOR || ny < COSINE_NORM_FLOOR {
                        Matrix::scalar(0.0)
                    } else {
                        Matrix::scalar(frobenius_inner(x, y)? / (nx * ny))
                    }
                }
            };
            self.nodes[i].value = value;
        }
        Ok(&self.nodes[root.0].value)
    }

    /// Reverse-mode gradients of the scalar at `root` with respect to every
    /// node value; call after `forward`.
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        self.backward_seeded(root, 1.0)
    }

    /// `backward` with an explicit seed gradient at the root. Gradients are
    /// exactly linear in the seed.
    pub fn backward_seeded(&mut self, root: NodeId, seed: f64) -> Result<()> {
        if self.shape(root) != (1, 1) {
            let (r, c) = self.shape(root);
            return Err(Error::Contract(format!(
                "backward root must be a 1x1 scalar, node {} is {r}x{c}",
                root.0
            )));
        }
        for node in &mut self.nodes {
            let shape = node.value.shape();
            node.grad = Matrix::zeros(shape.0, shape.1).expect("shapes validated");
        }
        self.nodes[root.0].grad = Matrix::scalar(seed);

        for i in (0..=root.0).rev() {
            let g = self.nodes[i].grad.clone();
            match self.nodes[i].op.clone() {
                Op::Leaf { .. } => {}
                Op::MatMul(a, b) => {
                    let ga = g.matmul(&self.nodes[b.0].value.transpose())?;
                    let gb = self.nodes[a.0].value.transpose().matmul(&g)?;
                    self.accumulate(a, &ga)?;
                    self.accumulate(b, &gb)?;
                }
                Op::Add(a, b) => {
                    self.accumulate(a, &g)?;
                    self.accumulate(b, &g)?;
                }
                Op::ScaleConst(a, c) => {
                    self.accumulate(a, &g.scale(c))?;
                }
                Op::ScaleBy(a, s) => {
                    let c = self.nodes[s.0].value.get(0, 0);
                    self.accumulate(a, &g.scale(c))?;
                    let gs = frobenius_inner(&g, &self.nodes[a.0].value)?;
                    self.accumulate(s, &Matrix::scalar(gs))?;
                }
                Op::BiasAdd(x, b) => {
                    self.accumulate(x, &g)?;
                    let mut gb = Matrix::zeros(g.rows(), 1)?;
                    for r in 0..g.rows() {
                        let mut acc = 0.0;
                        for c in 0..g.cols() {
                            acc += g.get(r, c);
                        }
                        gb.set(r, 0, acc);
                    }
                    self.accumulate(b, &gb)?;
                }
                Op::Relu(x) => {
                    let mask = self.nodes[x.0].value.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
                    self.accumulate(x, &g.hadamard(&mask)?)?;
                }
                Op::Sigmoid(x) => {
                    let ds = self.nodes[x.0].value.map(|v| {
                        let s = sigmoid(v);
                        s * (1.0 - s)
                    });
                    self.accumulate(x, &g.hadamard(&ds)?)?;
                }
                Op::SoftmaxCrossEntropy(logits, labels) => {
                    let z = self.nodes[logits.0].value.clone();
                    let upstream = g.get(0, 0);
                    let n = labels.len() as f64;
                    let mut gz = Matrix::zeros(z.rows(), z.cols())?;
                    for (col, &label) in labels.iter().enumerate() {
                        let (max, logsum) = column_logsumexp(&z, col);
                        for r in 0..z.rows() {
                            let p = (z.get(r, col) - max - logsum).exp();
                            let delta = if r == label { 1.0 } else { 0.0 };
                            gz.set(r, col, upstream * (p - delta) / n);
                        }
                    }
                    self.accumulate(logits, &gz)?;
                }
                Op::FrobNormSq(x) => {
                    let gx = self.nodes[x.0].value.scale(2.0 * g.get(0, 0));
                    self.accumulate(x, &gx)?;
                }
                Op::FrobCosine(a, b) => {
                    let x = self.nodes[a.0].value.clone();
                    let y = self.nodes[b.0].value.clone();
                    let nx = x.frobenius_norm();
                    let ny = y.frobenius_norm();
                    if nx < COSINE_NORM_FLOOR || ny < COSINE_NORM_FLOOR {
                        continue; // value pinned to 0, gradient defined as 0
                    }
                    let ip = frobenius_inner(&x, &y)?;
                    let up = g.get(0, 0);
                    // d cos / dx = (y - (ip / nx^2) x) / (nx ny)
                    let gx = y
                        .sub(&x.scale(ip / (nx * nx)))?
                        .scale(up / (nx * ny));
                    let gy = x
                        .sub(&y.scale(ip / (ny * ny)))?
                        .scale(up / (nx * ny));
                    self.accumulate(a, &gx)?;
                    self.accumulate(b, &gy)?;
                }
            }
        }
        Ok(())
    }

    fn accumulate(&mut self, id: NodeId, g: &Matrix) -> Result<()> {
        self.nodes[id.0].grad = self.nodes[id.0].grad.add(g)?;
        Ok(())
    }

    /// Compare the analytic gradient of `param` against central finite
    /// differences of the scalar at `root`.
    ///
    /// Relu kinks would make the two-sided difference invalid, so entries of
    /// relu inputs with magnitude below `50 * eps` are first nudged away from
    /// zero: directly when the relu reads a leaf, otherwise by jittering all
    /// non-trainable leaves a few rounds. The report lists every (node,
    /// entry) that was nudged.
    pub fn grad_check(&mut self, root: NodeId, param: NodeId, eps: f64) -> Result<GradCheckReport> {
        if !(eps > 1e-8 && eps < 1e-3) {
            return Err(Error::Contract(format!(
                "grad_check eps must lie in (1e-8, 1e-3), got {eps}"
            )));
        }
        if !matches!(self.nodes[param.0].op, Op::Leaf { .. }) {
            return Err(Error::Contract(format!(
                "grad_check target node {} is not a leaf",
                param.0
            )));
        }
        self.forward(root)?;
        let nudged = self.nudge_relu_kinks(root, 50.0 * eps)?;

        self.forward(root)?;
        self.backward(root)?;
        let analytic = self.nodes[param.0].grad.clone();

        let base = self.nodes[param.0].value.clone();
        let mut max_rel = 0.0_f64;
        for idx in 0..base.data().len() {
            let mut plus = base.clone();
            plus.data_mut()[idx] += eps;
            self.nodes[param.0].value = plus;
            let f_plus = self.forward(root)?.get(0, 0);

            let mut minus = base.clone();
            minus.data_mut()[idx] -= eps;
            self.nodes[param.0].value = minus;
            let f_minus = self.forward(root)?.get(0, 0);

            let cd = (f_plus - f_minus) / (2.0 * eps);
            let an = analytic.data()[idx];
            let rel = (an - cd).abs() / (an.abs() + cd.abs() + 1e-12);
            max_rel = max_rel.max(rel);
        }
        self.nodes[param.0].value = base;
        self.forward(root)?;
        Ok(GradCheckReport {
            max_rel_err: max_rel,
            nudged,
        })
    }

    /// Move relu-input entries out of the `[-margin, margin]` kink zone.
    fn nudge_relu_kinks(&mut self, root: NodeId, margin: f64) -> Result<Vec<(usize, usize)>> {
        let relu_inputs: Vec<NodeId> = self.nodes[..=root.0]
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu(x) => Some(x),
                _ => None,
            })
            .collect();
        let mut nudged = Vec::new();
        for &src in &relu_inputs {
            if matches!(self.nodes[src.0].op, Op::Leaf { .. }) {
                let data = self.nodes[src.0].value.data_mut();
                for (idx, v) in data.iter_mut().enumerate() {
                    if v.abs() < margin {
                        *v = if *v >= 0.0 { margin } else { -margin };
                        nudged.push((src.0, idx));
                    }
                }
            }
        }
        // Interior relu inputs: jitter the non-trainable leaves until every
        // pre-activation clears the kink zone (or give up after a few rounds).
        for _round in 0..8 {
            self.forward(root)?;
            let mut offenders = Vec::new();
            for &src in &relu_inputs {
                if matches!(self.nodes[src.0].op, Op::Leaf { .. }) {
                    continue;
                }
                for (idx, v) in self.nodes[src.0].value.data().iter().enumerate() {
                    if v.abs() < margin {
                        offenders.push((src.0, idx));
                    }
                }
            }
            if offenders.is_empty() {
                break;
            }
            for i in 0..=root.0 {
                if matches!(self.nodes[i].op, Op::Leaf { trainable: false }) {
                    for v in self.nodes[i].value.data_mut() {
                        *v += 3.0 * margin;
                    }
                }
            }
            nudged.extend(offenders);
        }
        Ok(nudged)
    }
}

/// Result of [`Tape::grad_check`].
#[derive(Debug)]
pub struct GradCheckReport {
    /// max over entries of |analytic - central difference| /
    /// (|analytic| + |cd| + 1e-12)
    pub max_rel_err: f64,
    /// (node index, flat entry index) pairs moved away from a relu kink.
    pub nudged: Vec<(usize, usize)>,
}

#[inline]
pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// (column max, log sum exp of the shifted column)
fn column_logsumexp(z: &Matrix, col: usize) -> (f64, f64) {
    let mut max = f64::NEG_INFINITY;
    for r in 0..z.rows() {
        max = max.max(z.get(r, col));
    }
    let mut sum = 0.0;
    for r in 0..z.rows() {
        sum += (z.get(r, col) - max).exp();
    }
    (max, sum.ln())
}
