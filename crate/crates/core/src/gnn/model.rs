use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::conv::chebyshev_basis;
use super::laplacian::{gcn_propagation, normalized_laplacian, scaled_laplacian};
use super::{ConvSpec, Fusion, GnnError};
use crate::tensor::{Matrix, NodeId, Tape};

/// How the second modality's adjacency is derived from the similarity matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SimilarityMode {
    /// Every off-diagonal similarity is an edge weight.
    #[default]
    Dense,
    /// Similarities restricted to the edges of the original graph.
    Masked,
}

impl fmt::Display for SimilarityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimilarityMode::Dense => "dense",
            SimilarityMode::Masked => "masked",
        })
    }
}

impl FromStr for SimilarityMode {
    type Err = GnnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "dense" => Ok(SimilarityMode::Dense),
            "masked" => Ok(SimilarityMode::Masked),
            other => Err(GnnError::Config(format!("unknown similarity mode `{other}`"))),
        }
    }
}

/// Precomputed graph operator consumed by a tower.
#[derive(Clone, Debug, PartialEq)]
pub enum ModalityOperator {
    /// `T_0(L̃) … T_{K−1}(L̃)`.
    Cheb { basis: Vec<Matrix> },
    /// Symmetrically normalized `A + I`.
    Gcn { propagation: Matrix },
}

impl ModalityOperator {
    pub fn new(adjacency: &Matrix, conv: ConvSpec) -> Result<Self, GnnError> {
        match conv {
            ConvSpec::Cheb { k } => {
                let l = scaled_laplacian(&normalized_laplacian(adjacency)?);
                Ok(ModalityOperator::Cheb {
                    basis: chebyshev_basis(&l, k)?,
                })
            }
            ConvSpec::Gcn => Ok(ModalityOperator::Gcn {
                propagation: gcn_propagation(adjacency)?,
            }),
        }
    }

    pub fn nodes(&self) -> usize {
        match self {
            ModalityOperator::Cheb { basis } => basis[0].rows(),
            ModalityOperator::Gcn { propagation } => propagation.rows(),
        }
    }
}

/// Operators for the structural modality (`A`) and the similarity modality.
pub fn build_modality_operators(
    a: &Matrix,
    s: &Matrix,
    conv: ConvSpec,
    mode: SimilarityMode,
) -> Result<(ModalityOperator, ModalityOperator), GnnError> {
    let a2 = similarity_adjacency(a, s, mode)?;
    Ok((ModalityOperator::new(a, conv)?, ModalityOperator::new(&a2, conv)?))
}

/// Adjacency of the similarity modality: `S` (dense) or `A ⊙ S` (masked),
/// with the diagonal zeroed.
pub fn similarity_adjacency(a: &Matrix, s: &Matrix, mode: SimilarityMode) -> Result<Matrix, GnnError> {
    if a.shape() != s.shape() {
        return Err(GnnError::BadAdjacency(format!(
            "A is {:?} but S is {:?}",
            a.shape(),
            s.shape()
        )));
    }
    let mut out = match mode {
        SimilarityMode::Dense => s.clone(),
        SimilarityMode::Masked => a.zip_with(s, "mask", |x, y| x * y)?,
    };
    for i in 0..out.rows() {
        out.set(i, i, 0.0);
    }
    Ok(out)
}

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub num_classes: usize,
    pub conv: ConvSpec,
    pub fusion: Fusion,
    /// Output widths of the three convolution layers of each tower.
    pub dims: [usize; 3],
    pub fc_dim: usize,
    pub dropout: f64,
}

impl ModelConfig {
    pub fn new(input_dim: usize, num_classes: usize) -> Self {
        ModelConfig {
            input_dim,
            num_classes,
            conv: ConvSpec::default(),
            fusion: Fusion::Max,
            dims: [16, 64, 128],
            fc_dim: 128,
            dropout: 0.1,
        }
    }

    /// Width of the fused node representation.
    pub fn fused_dim(&self) -> usize {
        match self.fusion {
            Fusion::Concat => 2 * self.dims[2],
            Fusion::Max | Fusion::Hadamard => self.dims[2],
        }
    }

    pub fn validate(&self) -> Result<(), GnnError> {
        if self.input_dim == 0 || self.dims.contains(&0) || self.fc_dim == 0 {
            return Err(GnnError::Config("layer widths must be positive".into()));
        }
        if self.num_classes < 2 {
            return Err(GnnError::Config("need at least two classes".into()));
        }
        if self.conv.slices() == 0 {
            return Err(GnnError::ZeroDegree);
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(GnnError::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    /// Parameter names and shapes in storage order.
    pub fn layout(&self) -> Vec<(String, (usize, usize))> {
        let k = self.conv.slices();
        let mut out = Vec::new();
        for tower in ["tower1", "tower2"] {
            let mut d_in = self.input_dim;
            for (l, &d_out) in self.dims.iter().enumerate() {
                out.push((format!("{tower}.conv{l}"), (k * d_in, d_out)));
                d_in = d_out;
            }
        }
        out.push(("fc1.weight".into(), (self.fused_dim(), self.fc_dim)));
        out.push(("fc1.bias".into(), (1, self.fc_dim)));
        out.push(("classifier.weight".into(), (self.fc_dim, self.num_classes)));
        out.push(("classifier.bias".into(), (1, self.num_classes)));
        out
    }
}

/// Trainable weights. Chebyshev layers store their `K` slices stacked
/// vertically, slice `k` in rows `k·d_in .. (k+1)·d_in`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub tower1: Vec<Matrix>,
    pub tower2: Vec<Matrix>,
    pub fc1_w: Matrix,
    pub fc1_b: Matrix,
    pub cls_w: Matrix,
    pub cls_b: Matrix,
}

fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, fan_in: usize, fan_out: usize, rng: &mut R) -> Matrix {
    let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.random_range(-r..r)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized buffer")
}

impl ModelParams {
    /// Glorot-uniform weights and zero biases.
    pub fn init<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<Self, GnnError> {
        config.validate()?;
        let k = config.conv.slices();
        let tower = |rng: &mut R| {
            let mut d_in = config.input_dim;
            config
                .dims
                .iter()
                .map(|&d_out| {
                    let w = glorot(k * d_in, d_out, d_in, d_out, rng);
                    d_in = d_out;
                    w
                })
                .collect::<Vec<_>>()
        };
        let tower1 = tower(rng);
        let tower2 = tower(rng);
        let fd = config.fused_dim();
        Ok(ModelParams {
            tower1,
            tower2,
            fc1_w: glorot(fd, config.fc_dim, fd, config.fc_dim, rng),
            fc1_b: Matrix::zeros(1, config.fc_dim),
            cls_w: glorot(
                config.fc_dim,
                config.num_classes,
                config.fc_dim,
                config.num_classes,
                rng,
            ),
            cls_b: Matrix::zeros(1, config.num_classes),
        })
    }

    /// Builds parameters from matrices in [`ModelConfig::layout`] order.
    pub fn from_tensors(config: &ModelConfig, tensors: Vec<Matrix>) -> Result<Self, GnnError> {
        let layout = config.layout();
        if tensors.len() != layout.len() {
            return Err(GnnError::Config(format!(
                "expected {} tensors, got {}",
                layout.len(),
                tensors.len()
            )));
        }
        for ((name, shape), t) in layout.iter().zip(&tensors) {
            if t.shape() != *shape {
                return Err(GnnError::Config(format!(
                    "{name} should be {}x{}, got {}x{}",
                    shape.0,
                    shape.1,
                    t.rows(),
                    t.cols()
                )));
            }
        }
        let mut it = tensors.into_iter();
        let mut take = |n: usize| (0..n).map(|_| it.next().expect("length checked")).collect::<Vec<_>>();
        let tower1 = take(3);
        let tower2 = take(3);
        let mut rest = take(4).into_iter();
        let mut next = || rest.next().expect("length checked");
        Ok(ModelParams {
            tower1,
            tower2,
            fc1_w: next(),
            fc1_b: next(),
            cls_w: next(),
            cls_b: next(),
        })
    }

    /// All tensors in [`ModelConfig::layout`] order.
    pub fn tensors(&self) -> Vec<&Matrix> {
        let mut out: Vec<&Matrix> = self.tower1.iter().chain(&self.tower2).collect();
        out.extend([&self.fc1_w, &self.fc1_b, &self.cls_w, &self.cls_b]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out: Vec<&mut Matrix> = self.tower1.iter_mut().chain(self.tower2.iter_mut()).collect();
        out.extend([&mut self.fc1_w, &mut self.fc1_b, &mut self.cls_w, &mut self.cls_b]);
        out
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.data_mut().fill(0.0);
        }
        z
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Places every tensor on the tape as an input.
    pub fn register(&self, tape: &mut Tape) -> ParamNodes {
        let mut put = |m: &Matrix| tape.input(m.clone());
        ParamNodes {
            tower1: self.tower1.iter().map(&mut put).collect(),
            tower2: self.tower2.iter().map(&mut put).collect(),
            fc1_w: put(&self.fc1_w),
            fc1_b: put(&self.fc1_b),
            cls_w: put(&self.cls_w),
            cls_b: put(&self.cls_b),
        }
    }
}

/// Tape handles of registered parameters.
#[derive(Clone, Debug)]
pub struct ParamNodes {
    pub tower1: Vec<NodeId>,
    pub tower2: Vec<NodeId>,
    pub fc1_w: NodeId,
    pub fc1_b: NodeId,
    pub cls_w: NodeId,
    pub cls_b: NodeId,
}

impl ParamNodes {
    /// Handles in [`ModelConfig::layout`] order.
    pub fn all(&self) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self.tower1.iter().chain(&self.tower2).copied().collect();
        out.extend([self.fc1_w, self.fc1_b, self.cls_w, self.cls_b]);
        out
    }
}

/// Three convolution → ReLU → dropout stages.
pub fn tower_forward<R: Rng + ?Sized>(
    tape: &mut Tape,
    op: &ModalityOperator,
    x: NodeId,
    layers: &[NodeId],
    dropout: f64,
    rng: &mut R,
) -> Result<NodeId, GnnError> {
    if op.nodes() == 0 {
        return Err(GnnError::EmptyGraph);
    }
    let operators: Vec<NodeId> = match op {
        ModalityOperator::Cheb { basis } => basis[1..].iter().map(|t| tape.input(t.clone())).collect(),
        ModalityOperator::Gcn { propagation } => vec![tape.input(propagation.clone())],
    };
    let mut h = x;
    for &w in layers {
        let z = match op {
            ModalityOperator::Cheb { .. } => {
                let mut parts = vec![h];
                for &t in &operators {
                    parts.push(tape.matmul(t, h)?);
                }
                let stacked = if parts.len() == 1 {
                    h
                } else {
                    tape.concat_columns(&parts)?
                };
                tape.matmul(stacked, w)?
            }
            ModalityOperator::Gcn { .. } => {
                let p = tape.matmul(operators[0], h)?;
                tape.matmul(p, w)?
            }
        };
        let a = tape.relu(z);
        h = tape.dropout(a, dropout, rng)?;
    }
    Ok(h)
}

/// Combines the two tower outputs node by node.
pub fn fuse(tape: &mut Tape, z1: NodeId, z2: NodeId, fusion: Fusion) -> Result<NodeId, GnnError> {
    Ok(match fusion {
        Fusion::Max => tape.elementwise_max(z1, z2)?,
        Fusion::Concat => tape.concat_columns(&[z1, z2])?,
        Fusion::Hadamard => tape.hadamard(z1, z2)?,
    })
}

/// `h = colmax(dropout(ReLU(H W + b)))`, a `1×fc_dim` graph embedding.
pub fn compat_and_readout<R: Rng + ?Sized>(
    tape: &mut Tape,
    h: NodeId,
    w: NodeId,
    b: NodeId,
    dropout: f64,
    rng: &mut R,
) -> Result<NodeId, GnnError> {
    if tape.value(h).rows() == 0 {
        return Err(GnnError::EmptyGraph);
    }
    let lin = tape.matmul(h, w)?;
    let lin = tape.add(lin, b)?;
    let act = tape.relu(lin);
    let dropped = tape.dropout(act, dropout, rng)?;
    Ok(tape.column_max(dropped)?)
}

/// Class logits `h W + b`; the predicted distribution is their softmax.
pub fn classify(tape: &mut Tape, h: NodeId, w: NodeId, b: NodeId) -> Result<NodeId, GnnError> {
    let lin = tape.matmul(h, w)?;
    Ok(tape.add(lin, b)?)
}

/// `−ln p_label`, with exact zeros clamped to the smallest positive double.
pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(f64::MIN_POSITIVE).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{softmax, Mode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn path(n: usize) -> Matrix {
        let mut a = Matrix::zeros(n, n);
        for i in 0..n - 1 {
            a.set(i, i + 1, 1.0);
            a.set(i + 1, i, 1.0);
        }
        a
    }

    fn small_config() -> ModelConfig {
        let mut c = ModelConfig::new(3, 2);
        c.dims = [4, 6, 8];
        c.fc_dim = 8;
        c.conv = ConvSpec::Cheb { k: 3 };
        c
    }

    fn embed(config: &ModelConfig, params: &ModelParams, a: &Matrix, x: &Matrix, mode: Mode, seed: u64) -> Matrix {
        let op = ModalityOperator::new(a, config.conv).unwrap();
        let mut tape = Tape::new(mode);
        let p = params.register(&mut tape);
        let xi = tape.input(x.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = tower_forward(&mut tape, &op, xi, &p.tower1, config.dropout, &mut rng).unwrap();
        tape.value(z).clone()
    }

    fn features(n: usize, d: usize) -> Matrix {
        let data = (0..n * d).map(|i| ((i * 7 % 5) as f64) - 1.5).collect();
        Matrix::from_vec(n, d, data).unwrap()
    }

    #[test]
    fn layout_dims() {
        let mut c = ModelConfig::new(7, 2);
        let shapes: Vec<_> = c.layout().into_iter().map(|(_, s)| s).collect();
        assert_eq!(shapes[0], (6 * 7, 16));
        assert_eq!(shapes[1], (6 * 16, 64));
        assert_eq!(shapes[2], (6 * 64, 128));
        assert_eq!(shapes[6], (128, 128));
        c.fusion = Fusion::Concat;
        assert_eq!(c.layout()[6].1, (256, 128));
    }

    #[test]
    fn tower_output_nonnegative_and_eval_deterministic() {
        let c = small_config();
        let params = ModelParams::init(&c, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let a = path(5);
        let x = features(5, 3);
        let z1 = embed(&c, &params, &a, &x, Mode::Eval, 1);
        let z2 = embed(&c, &params, &a, &x, Mode::Eval, 2);
        assert_eq!(z1, z2);
        assert!(z1.data().iter().all(|&v| v >= 0.0));
        assert_eq!(z1.shape(), (5, 8));
        let t1 = embed(&c, &params, &a, &x, Mode::Train, 9);
        let t2 = embed(&c, &params, &a, &x, Mode::Train, 9);
        assert_eq!(t1, t2);
        assert_eq!(
            embed(&c, &params, &a, &Matrix::zeros(5, 3), Mode::Eval, 0),
            Matrix::zeros(5, 8)
        );
    }

    #[test]
    fn permutation_equivariance() {
        for conv in [ConvSpec::Cheb { k: 3 }, ConvSpec::Gcn] {
            let mut c = small_config();
            c.conv = conv;
            let params = ModelParams::init(&c, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
            let mut a = path(5);
            a.set(0, 4, 1.0);
            a.set(4, 0, 1.0);
            a.set(1, 3, 0.5);
            a.set(3, 1, 0.5);
            let x = features(5, 3);
            let perm = [3, 0, 4, 1, 2];
            let z = embed(&c, &params, &a, &x, Mode::Eval, 0);
            let zp = embed(
                &c,
                &params,
                &a.permute_symmetric(&perm),
                &x.select_rows(&perm),
                Mode::Eval,
                0,
            );
            let expect = z.select_rows(&perm);
            assert!(zp.data().iter().zip(expect.data()).all(|(p, q)| (p - q).abs() < 1e-12));
        }
    }

    #[test]
    fn fusion_shapes_and_values() {
        let mut tape = Tape::new(Mode::Eval);
        let z1 = tape.input(Matrix::from_rows(&[&[1.0, 0.0]]));
        let z2 = tape.input(Matrix::from_rows(&[&[0.0, 2.0]]));
        let h = fuse(&mut tape, z1, z2, Fusion::Max).unwrap();
        assert_eq!(tape.value(h), &Matrix::from_rows(&[&[1.0, 2.0]]));
        let h = fuse(&mut tape, z1, z2, Fusion::Concat).unwrap();
        assert_eq!(tape.value(h).shape(), (1, 4));
        let ones = tape.input(Matrix::filled(1, 2, 1.0));
        let h = fuse(&mut tape, z1, ones, Fusion::Hadamard).unwrap();
        assert_eq!(tape.value(h), tape.value(z1));
        let other = tape.input(Matrix::zeros(2, 2));
        assert!(fuse(&mut tape, z1, other, Fusion::Max).is_err());
        assert!(fuse(&mut tape, z1, other, Fusion::Concat).is_err());
    }

    #[test]
    fn readout_is_max_over_nodes() {
        let mut tape = Tape::new(Mode::Eval);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = tape.input(Matrix::from_rows(&[&[1.0, -1.0], &[0.5, 2.0]]));
        let b = tape.input(Matrix::row_vector(&[0.1, 0.0]));
        let single = tape.input(Matrix::from_rows(&[&[1.0, 2.0]]));
        let dup = tape.input(Matrix::from_rows(&[&[1.0, 2.0], &[1.0, 2.0]]));
        let h1 = compat_and_readout(&mut tape, single, w, b, 0.1, &mut rng).unwrap();
        let h2 = compat_and_readout(&mut tape, dup, w, b, 0.1, &mut rng).unwrap();
        assert_eq!(tape.value(h1), tape.value(h2));
        let lin = Matrix::from_rows(&[&[1.0, 2.0]])
            .matmul(&tape.value(w).clone())
            .unwrap();
        let expect = lin.zip_with(tape.value(b), "add", |x, y| (x + y).max(0.0)).unwrap();
        assert_eq!(tape.value(h1), &expect);
        let rows = tape.input(Matrix::from_rows(&[&[3.0, -1.0], &[0.0, 1.0], &[-2.0, 0.5]]));
        let swapped = tape.input(Matrix::from_rows(&[&[-2.0, 0.5], &[3.0, -1.0], &[0.0, 1.0]]));
        let r1 = compat_and_readout(&mut tape, rows, w, b, 0.0, &mut rng).unwrap();
        let r2 = compat_and_readout(&mut tape, swapped, w, b, 0.0, &mut rng).unwrap();
        assert_eq!(tape.value(r1), tape.value(r2));
        let empty = tape.input(Matrix::zeros(0, 2));
        assert_eq!(
            compat_and_readout(&mut tape, empty, w, b, 0.0, &mut rng),
            Err(GnnError::EmptyGraph)
        );
    }

    #[test]
    fn classifier_probabilities() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        let p = softmax(&[1000.0, 0.0]);
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1] >= 0.0 && p.iter().all(|v| v.is_finite()));
        let a = softmax(&[0.3, -1.2, 2.0]);
        let b = softmax(&[5.3, 3.8, 7.0]);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let mut tape = Tape::new(Mode::Eval);
        let h = tape.input(Matrix::row_vector(&[1.0, 2.0]));
        let w = tape.input(Matrix::zeros(2, 3));
        let bias = tape.input(Matrix::zeros(1, 3));
        let logits = classify(&mut tape, h, w, bias).unwrap();
        assert_eq!(tape.value(logits), &Matrix::zeros(1, 3));
    }

    #[test]
    fn cross_entropy_reference_values() {
        assert_eq!(cross_entropy(&[0.0, 1.0], 1), 0.0);
        assert!((cross_entropy(&[0.25; 4], 2) - 4f64.ln()).abs() < 1e-15);
        assert!((cross_entropy(&[0.8, 0.2], 0) - 0.223_143_551_314_209_7).abs() < 1e-12);
        assert!(cross_entropy(&[1.0, 0.0], 1).is_finite());
    }

    #[test]
    fn similarity_operator_construction() {
        let a = path(3);
        let s = Matrix::from_rows(&[&[1.0, 0.4, 0.2], &[0.4, 1.0, 0.7], &[0.2, 0.7, 1.0]]);
        let dense = similarity_adjacency(&a, &s, SimilarityMode::Dense).unwrap();
        assert_eq!(
            dense,
            Matrix::from_rows(&[&[0.0, 0.4, 0.2], &[0.4, 0.0, 0.7], &[0.2, 0.7, 0.0]])
        );
        assert!(dense.is_symmetric(0.0));
        let masked = similarity_adjacency(&a, &s, SimilarityMode::Masked).unwrap();
        assert_eq!(
            masked,
            Matrix::from_rows(&[&[0.0, 0.4, 0.0], &[0.4, 0.0, 0.7], &[0.0, 0.7, 0.0]])
        );
        let (o1, o2) = build_modality_operators(&a, &s, ConvSpec::Gcn, SimilarityMode::Dense).unwrap();
        assert_eq!(o1.nodes(), 3);
        assert_ne!(o1, o2);
    }

    #[test]
    fn params_roundtrip_through_tensors() {
        let c = small_config();
        let p = ModelParams::init(&c, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let back = ModelParams::from_tensors(&c, p.tensors().into_iter().cloned().collect()).unwrap();
        assert_eq!(p, back);
        assert!(ModelParams::from_tensors(&c, vec![]).is_err());
        let bound = (6.0f64 / 7.0).sqrt();
        assert!(p.tower1[0].data().iter().all(|v| v.abs() <= bound));
    }
}
