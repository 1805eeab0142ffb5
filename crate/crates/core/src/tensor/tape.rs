use rand::Rng;

use super::{Matrix, TensorError};

/// Index of a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Row-aligned distance used by the distance-metric ablation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowMetric {
    Manhattan,
    Euclidean,
    Cosine,
}

/// Norm below which a vector is treated as zero by cosine-based ops.
pub const COSINE_ZERO_NORM: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Input,
    MatMul,
    Add,
    Hadamard,
    Relu,
    Dropout,
    ElementwiseMax,
    ColumnMax,
    ConcatColumns,
    RowSum,
    SumAll,
    CosineCost,
    ScalarScale,
    SoftmaxCrossEntropy,
    OtLoss,
    AlignedDistance,
}

#[derive(Debug)]
enum Op {
    Input,
    MatMul(NodeId, NodeId),
    /// Second operand is either the same shape or a `1×c` row broadcast over rows.
    Add(NodeId, NodeId),
    Hadamard(NodeId, NodeId),
    Relu(NodeId),
    /// `None` mask means identity (eval mode or zero rate).
    Dropout(NodeId, Option<Vec<f64>>),
    ElementwiseMax(NodeId, NodeId, Vec<bool>),
    ColumnMax(NodeId, Vec<usize>),
    ConcatColumns(Vec<NodeId>),
    RowSum(NodeId),
    SumAll(NodeId),
    CosineCost(NodeId, NodeId),
    ScalarScale(NodeId, f64),
    SoftmaxCrossEntropy {
        logits: NodeId,
        target: usize,
        probs: Vec<f64>,
    },
    OtLoss {
        cost: NodeId,
        w1: NodeId,
        w2: NodeId,
        grad_cost: Matrix,
        grad_w1: Matrix,
        grad_w2: Matrix,
    },
    AlignedDistance(NodeId, NodeId, RowMetric),
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Input => OpKind::Input,
            Op::MatMul(..) => OpKind::MatMul,
            Op::Add(..) => OpKind::Add,
            Op::Hadamard(..) => OpKind::Hadamard,
            Op::Relu(..) => OpKind::Relu,
            Op::Dropout(..) => OpKind::Dropout,
            Op::ElementwiseMax(..) => OpKind::ElementwiseMax,
            Op::ColumnMax(..) => OpKind::ColumnMax,
            Op::ConcatColumns(..) => OpKind::ConcatColumns,
            Op::RowSum(..) => OpKind::RowSum,
            Op::SumAll(..) => OpKind::SumAll,
            Op::CosineCost(..) => OpKind::CosineCost,
            Op::ScalarScale(..) => OpKind::ScalarScale,
            Op::SoftmaxCrossEntropy { .. } => OpKind::SoftmaxCrossEntropy,
            Op::OtLoss { .. } => OpKind::OtLoss,
            Op::AlignedDistance(..) => OpKind::AlignedDistance,
        }
    }
}

#[derive(Debug)]
struct TapeNode {
    value: Matrix,
    op: Op,
}

/// Append-only record of a forward pass. Nodes are stored in creation order,
/// which is a topological order because every op only refers to earlier nodes.
#[derive(Debug)]
pub struct Tape {
    nodes: Vec<TapeNode>,
    mode: Mode,
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. `node`; zeros when the node does not reach the loss.
    pub fn wrt(&self, node: NodeId) -> Matrix {
        match &self.grads[node.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[node.0];
                Matrix::zeros(r, c)
            }
        }
    }

    pub fn reached(&self, node: NodeId) -> bool {
        self.grads[node.0].is_some()
    }
}

impl Tape {
    pub fn new(mode: Mode) -> Self {
        Tape {
            nodes: Vec::new(),
            mode,
        }
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

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    pub fn op_kind(&self, id: NodeId) -> OpKind {
        self.nodes[id.0].op.kind()
    }

    fn push(&mut self, value: Matrix, op: Op) -> NodeId {
        self.nodes.push(TapeNode { value, op });
        NodeId(self.nodes.len() - 1)
    }

    fn shape(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].value.shape()
    }

    fn mismatch(&self, op: &'static str, a: NodeId, b: NodeId) -> TensorError {
        TensorError::ShapeMismatch {
            op,
            left: self.shape(a),
            right: self.shape(b),
        }
    }

    /// Leaf node: a parameter or a constant.
    pub fn input(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Input)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    /// `a + b`, where `b` may also be a `1×cols` row added to every row of `a`.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        let value = if (ar, ac) == (br, bc) {
            self.value(a).zip_with(self.value(b), "add", |x, y| x + y)?
        } else if br == 1 && bc == ac {
            let mut v = self.value(a).clone();
            let bias = self.value(b).data().to_vec();
            for r in 0..ar {
                for (x, y) in v.row_mut(r).iter_mut().zip(&bias) {
                    *x += y;
                }
            }
            v
        } else {
            return Err(self.mismatch("add", a, b));
        };
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        let value = self.value(a).zip_with(self.value(b), "hadamard", |x, y| x * y)?;
        Ok(self.push(value, Op::Hadamard(a, b)))
    }

    /// ReLU with subgradient 0 at 0.
    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(|v| if v > 0.0 { v } else { 0.0 });
        self.push(value, Op::Relu(a))
    }

    /// Inverted dropout: kept activations are scaled by `1/(1-rate)` in train
    /// mode; identity in eval mode. Draws from `rng` only in train mode.
    pub fn dropout<R: Rng + ?Sized>(&mut self, a: NodeId, rate: f64, rng: &mut R) -> Result<NodeId, TensorError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(TensorError::InvalidArgument(format!(
                "dropout rate {rate} outside [0, 1)"
            )));
        }
        if self.mode == Mode::Eval || rate == 0.0 {
            let value = self.value(a).clone();
            return Ok(self.push(value, Op::Dropout(a, None)));
        }
        let keep_scale = 1.0 / (1.0 - rate);
        let mask: Vec<f64> = (0..self.value(a).len())
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep_scale })
            .collect();
        let src = self.value(a);
        let data = src.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = Matrix::from_vec(src.rows(), src.cols(), data)?;
        Ok(self.push(value, Op::Dropout(a, Some(mask))))
    }

    /// Elementwise max; ties select the first operand.
    pub fn elementwise_max(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        if self.shape(a) != self.shape(b) {
            return Err(self.mismatch("elementwise_max", a, b));
        }
        let (va, vb) = (self.value(a), self.value(b));
        let take_first: Vec<bool> = va.data().iter().zip(vb.data()).map(|(x, y)| x >= y).collect();
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(&x, &y)| if x >= y { x } else { y })
            .collect();
        let value = Matrix::from_vec(va.rows(), va.cols(), data)?;
        Ok(self.push(value, Op::ElementwiseMax(a, b, take_first)))
    }

    /// Column-wise max over rows, producing `1×cols`; ties select the first row.
    pub fn column_max(&mut self, a: NodeId) -> Result<NodeId, TensorError> {
        let v = self.value(a);
        if v.rows() == 0 {
            return Err(TensorError::InvalidArgument("column_max over zero rows".into()));
        }
        let mut arg = vec![0usize; v.cols()];
        let mut best = v.row(0).to_vec();
        for r in 1..v.rows() {
            for (c, &x) in v.row(r).iter().enumerate() {
                if x > best[c] {
                    best[c] = x;
                    arg[c] = r;
                }
            }
        }
        Ok(self.push(Matrix::row_vector(&best), Op::ColumnMax(a, arg)))
    }

    pub fn concat_columns(&mut self, parts: &[NodeId]) -> Result<NodeId, TensorError> {
        let first = *parts
            .first()
            .ok_or_else(|| TensorError::InvalidArgument("concat_columns needs at least one operand".into()))?;
        let rows = self.shape(first).0;
        for &p in parts {
            if self.shape(p).0 != rows {
                return Err(self.mismatch("concat_columns", first, p));
            }
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut value = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let mut offset = 0;
            for &p in parts {
                let src = self.value(p).row(r);
                value.row_mut(r)[offset..offset + src.len()].copy_from_slice(src);
                offset += src.len();
            }
        }
        Ok(self.push(value, Op::ConcatColumns(parts.to_vec())))
    }

    /// Row sums as an `n×1` column.
    pub fn row_sum(&mut self, a: NodeId) -> NodeId {
        let value = Matrix::column_vector(&self.value(a).row_sums());
        self.push(value, Op::RowSum(a))
    }

    /// Sum of every entry as a `1×1` matrix.
    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let value = Matrix::scalar(self.value(a).sum());
        self.push(value, Op::SumAll(a))
    }

    /// Pairwise cosine distances `1 - cos(a_i, b_j)`; pairs involving a
    /// near-zero row get distance 1 and no gradient.
    pub fn cosine_cost(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        if self.shape(a).1 != self.shape(b).1 {
            return Err(self.mismatch("cosine_cost", a, b));
        }
        let value = cosine_cost_matrix(self.value(a), self.value(b));
        Ok(self.push(value, Op::CosineCost(a, b)))
    }

    pub fn scalar_scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let value = self.value(a).scale(s);
        self.push(value, Op::ScalarScale(a, s))
    }

    /// Cross-entropy of `softmax(logits)` against class `target`, computed from
    /// a max-shifted log-sum-exp. `logits` must be `1×C`.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, target: usize) -> Result<NodeId, TensorError> {
        let z = self.value(logits);
        if z.rows() != 1 || target >= z.cols() {
            return Err(TensorError::InvalidArgument(format!(
                "softmax_cross_entropy expects 1xC logits and target < C, got {}x{} and target {target}",
                z.rows(),
                z.cols()
            )));
        }
        let probs = softmax(z.data());
        let m = z.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.data().iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        let loss = lse - z.data()[target];
        Ok(self.push(Matrix::scalar(loss), Op::SoftmaxCrossEntropy { logits, target, probs }))
    }

    /// Probabilities saved by a softmax-cross-entropy node.
    pub fn softmax_probs(&self, id: NodeId) -> Option<&[f64]> {
        match &self.nodes[id.0].op {
            Op::SoftmaxCrossEntropy { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// Scalar transport loss with precomputed sensitivities w.r.t. the cost
    /// matrix and both weight columns.
    #[allow(clippy::too_many_arguments)]
    pub fn ot_loss(
        &mut self,
        cost: NodeId,
        w1: NodeId,
        w2: NodeId,
        value: f64,
        grad_cost: Matrix,
        grad_w1: Matrix,
        grad_w2: Matrix,
    ) -> Result<NodeId, TensorError> {
        let (n1, n2) = self.shape(cost);
        if self.shape(w1) != (n1, 1) {
            return Err(self.mismatch("ot_loss", cost, w1));
        }
        if self.shape(w2) != (n2, 1) {
            return Err(self.mismatch("ot_loss", cost, w2));
        }
        if grad_cost.shape() != (n1, n2) || grad_w1.shape() != (n1, 1) || grad_w2.shape() != (n2, 1) {
            return Err(TensorError::InvalidArgument(
                "ot_loss sensitivities do not match operand shapes".into(),
            ));
        }
        Ok(self.push(
            Matrix::scalar(value),
            Op::OtLoss {
                cost,
                w1,
                w2,
                grad_cost,
                grad_w1,
                grad_w2,
            },
        ))
    }

    /// `Σ_i metric(a_i, b_i)` over aligned rows.
    pub fn aligned_distance(&mut self, a: NodeId, b: NodeId, metric: RowMetric) -> Result<NodeId, TensorError> {
        if self.shape(a) != self.shape(b) {
            return Err(self.mismatch("aligned_distance", a, b));
        }
        let value = aligned_distance_value(self.value(a), self.value(b), metric);
        Ok(self.push(Matrix::scalar(value), Op::AlignedDistance(a, b, metric)))
    }

    /// Reverse sweep from a `1×1` loss node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients, TensorError> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(TensorError::NonScalarLoss { shape });
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            for (parent, contrib) in self.vjp(node, &g)? {
                match &mut grads[parent.0] {
                    Some(acc) => acc.add_assign(&contrib),
                    slot @ None => *slot = Some(contrib),
                }
            }
            grads[idx] = Some(g);
        }

        grads.resize(self.nodes.len(), None);
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }

    fn vjp(&self, node: &TapeNode, g: &Matrix) -> Result<Vec<(NodeId, Matrix)>, TensorError> {
        let out = match &node.op {
            Op::Input => vec![],
            Op::MatMul(a, b) => {
                let ga = g.matmul_t(self.value(*b))?;
                let gb = self.value(*a).t_matmul(g)?;
                vec![(*a, ga), (*b, gb)]
            }
            Op::Add(a, b) => {
                if self.shape(*a) == self.shape(*b) {
                    vec![(*a, g.clone()), (*b, g.clone())]
                } else {
                    vec![(*a, g.clone()), (*b, Matrix::row_vector(&g.col_sums()))]
                }
            }
            Op::Hadamard(a, b) => {
                let ga = g.zip_with(self.value(*b), "hadamard", |x, y| x * y)?;
                let gb = g.zip_with(self.value(*a), "hadamard", |x, y| x * y)?;
                vec![(*a, ga), (*b, gb)]
            }
            Op::Relu(a) => {
                let ga = g.zip_with(self.value(*a), "relu", |x, v| if v > 0.0 { x } else { 0.0 })?;
                vec![(*a, ga)]
            }
            Op::Dropout(a, mask) => match mask {
                None => vec![(*a, g.clone())],
                Some(m) => {
                    let data = g.data().iter().zip(m).map(|(x, k)| x * k).collect();
                    vec![(*a, Matrix::from_vec(g.rows(), g.cols(), data)?)]
                }
            },
            Op::ElementwiseMax(a, b, take_first) => {
                let mut ga = Matrix::zeros(g.rows(), g.cols());
                let mut gb = Matrix::zeros(g.rows(), g.cols());
                for (i, (&x, &first)) in g.data().iter().zip(take_first).enumerate() {
                    if first {
                        ga.data_mut()[i] = x;
                    } else {
                        gb.data_mut()[i] = x;
                    }
                }
                vec![(*a, ga), (*b, gb)]
            }
            Op::ColumnMax(a, arg) => {
                let (r, c) = self.shape(*a);
                let mut ga = Matrix::zeros(r, c);
                for (col, &row) in arg.iter().enumerate() {
                    ga.set(row, col, g.data()[col]);
                }
                vec![(*a, ga)]
            }
            Op::ConcatColumns(parts) => {
                let mut offset = 0;
                let mut out = Vec::with_capacity(parts.len());
                for &p in parts {
                    let (r, c) = self.shape(p);
                    let mut gp = Matrix::zeros(r, c);
                    for row in 0..r {
                        gp.row_mut(row).copy_from_slice(&g.row(row)[offset..offset + c]);
                    }
                    offset += c;
                    out.push((p, gp));
                }
                out
            }
            Op::RowSum(a) => {
                let (r, c) = self.shape(*a);
                let mut ga = Matrix::zeros(r, c);
                for row in 0..r {
                    let v = g.data()[row];
                    ga.row_mut(row).iter_mut().for_each(|x| *x = v);
                }
                vec![(*a, ga)]
            }
            Op::SumAll(a) => {
                let (r, c) = self.shape(*a);
                vec![(*a, Matrix::filled(r, c, g.data()[0]))]
            }
            Op::CosineCost(a, b) => {
                let (ga, gb) = cosine_cost_vjp(self.value(*a), self.value(*b), g);
                vec![(*a, ga), (*b, gb)]
            }
            Op::ScalarScale(a, s) => vec![(*a, g.scale(*s))],
            Op::SoftmaxCrossEntropy { logits, target, probs } => {
                let up = g.data()[0];
                let mut gz = Matrix::row_vector(probs);
                gz.data_mut()[*target] -= 1.0;
                vec![(*logits, gz.scale(up))]
            }
            Op::OtLoss {
                cost,
                w1,
                w2,
                grad_cost,
                grad_w1,
                grad_w2,
            } => {
                let up = g.data()[0];
                vec![
                    (*cost, grad_cost.scale(up)),
                    (*w1, grad_w1.scale(up)),
                    (*w2, grad_w2.scale(up)),
                ]
            }
            Op::AlignedDistance(a, b, metric) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let up = g.data()[0];
                let ga = aligned_distance_grad(va, vb, *metric).scale(up);
                let gb = match metric {
                    RowMetric::Cosine => aligned_distance_grad(vb, va, *metric).scale(up),
                    _ => ga.scale(-1.0),
                };
                vec![(*a, ga), (*b, gb)]
            }
        };
        Ok(out)
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn cosine_cost_matrix(a: &Matrix, b: &Matrix) -> Matrix {
    let na: Vec<f64> = (0..a.rows()).map(|i| norm(a.row(i))).collect();
    let nb: Vec<f64> = (0..b.rows()).map(|j| norm(b.row(j))).collect();
    let mut out = Matrix::filled(a.rows(), b.rows(), 1.0);
    for i in 0..a.rows() {
        if na[i] < COSINE_ZERO_NORM {
            continue;
        }
        for j in 0..b.rows() {
            if nb[j] < COSINE_ZERO_NORM {
                continue;
            }
            let dot: f64 = a.row(i).iter().zip(b.row(j)).map(|(x, y)| x * y).sum();
            out.set(i, j, 1.0 - dot / (na[i] * nb[j]));
        }
    }
    out
}

fn cosine_cost_vjp(a: &Matrix, b: &Matrix, g: &Matrix) -> (Matrix, Matrix) {
    let d = a.cols();
    let na: Vec<f64> = (0..a.rows()).map(|i| norm(a.row(i))).collect();
    let nb: Vec<f64> = (0..b.rows()).map(|j| norm(b.row(j))).collect();
    let mut ga = Matrix::zeros(a.rows(), d);
    let mut gb = Matrix::zeros(b.rows(), d);
    for i in 0..a.rows() {
        if na[i] < COSINE_ZERO_NORM {
            continue;
        }
        for j in 0..b.rows() {
            if nb[j] < COSINE_ZERO_NORM {
                continue;
            }
            let gij = g.get(i, j);
            if gij == 0.0 {
                continue;
            }
            let (ai, bj) = (a.row(i), b.row(j));
            let dot: f64 = ai.iter().zip(bj).map(|(x, y)| x * y).sum();
            let cos = dot / (na[i] * nb[j]);
            // c = 1 - cos; d cos / d a = b/(|a||b|) - cos * a/|a|^2
            for o in 0..d {
                let dcos_da = bj[o] / (na[i] * nb[j]) - cos * ai[o] / (na[i] * na[i]);
                let dcos_db = ai[o] / (na[i] * nb[j]) - cos * bj[o] / (nb[j] * nb[j]);
                ga.row_mut(i)[o] -= gij * dcos_da;
                gb.row_mut(j)[o] -= gij * dcos_db;
            }
        }
    }
    (ga, gb)
}

pub(crate) fn aligned_distance_value(a: &Matrix, b: &Matrix, metric: RowMetric) -> f64 {
    (0..a.rows()).map(|i| row_metric(a.row(i), b.row(i), metric)).sum()
}

pub(crate) fn row_metric(x: &[f64], y: &[f64], metric: RowMetric) -> f64 {
    match metric {
        RowMetric::Manhattan => x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum(),
        RowMetric::Euclidean => x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt(),
        RowMetric::Cosine => {
            let (nx, ny) = (norm(x), norm(y));
            if nx < COSINE_ZERO_NORM || ny < COSINE_ZERO_NORM {
                1.0
            } else {
                1.0 - x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>() / (nx * ny)
            }
        }
    }
}

/// Gradient of the aligned distance w.r.t. the first operand. All three
/// metrics are symmetric, so swapping the operands gives the other gradient.
fn aligned_distance_grad(a: &Matrix, b: &Matrix, metric: RowMetric) -> Matrix {
    let mut ga = Matrix::zeros(a.rows(), a.cols());
    for i in 0..a.rows() {
        let (x, y) = (a.row(i), b.row(i));
        let out = ga.row_mut(i);
        match metric {
            RowMetric::Manhattan => {
                for o in 0..x.len() {
                    let d = x[o] - y[o];
                    out[o] = if d > 0.0 {
                        1.0
                    } else if d < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                }
            }
            RowMetric::Euclidean => {
                let dist = row_metric(x, y, RowMetric::Euclidean);
                if dist > 0.0 {
                    for o in 0..x.len() {
                        out[o] = (x[o] - y[o]) / dist;
                    }
                }
            }
            RowMetric::Cosine => {
                let (nx, ny) = (norm(x), norm(y));
                if nx >= COSINE_ZERO_NORM && ny >= COSINE_ZERO_NORM {
                    let cos = x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>() / (nx * ny);
                    for o in 0..x.len() {
                        out[o] = -(y[o] / (nx * ny) - cos * x[o] / (nx * nx));
                    }
                }
            }
        }
    }
    ga
}
