use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::DistanceKind;
use super::forward::{attach_total, forward_sample, ForwardSettings, PreparedGraph};
use super::reg::RegMode;
use super::TrainError;
use crate::gnn::{tower_forward, Fusion, ModelConfig, ModelParams, SimilarityMode};
use crate::graph_io::{synthesize_modality, GraphSample};
use crate::ot::{amosl_term, transport_gradient_audit, GradMode};
use crate::tensor::{finite_diff_check, primitive_audits, GradAudit, Matrix, Mode, Tape};

/// One line of the gradient audit.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditLine {
    pub name: String,
    pub max_relative_error: f64,
    pub tolerance: f64,
}

impl AuditLine {
    pub fn passed(&self) -> bool {
        self.max_relative_error < self.tolerance
    }
}

pub const PRIMITIVE_TOLERANCE: f64 = 1e-6;
pub const TRANSPORT_TOLERANCE: f64 = 1e-4;
pub const TRANSPORT_STEP: f64 = 1e-6;
pub const NETWORK_TOLERANCE: f64 = 1e-3;
pub const NETWORK_STEP: f64 = 1e-5;
/// Smallest LP nondegeneracy margin accepted for the network toy batch.
const NETWORK_MARGIN: f64 = 0.02;

/// Two small graphs and a narrow model for end-to-end differentiation.
#[derive(Clone, Debug)]
pub struct NetworkToy {
    pub graphs: Vec<PreparedGraph>,
    pub model: ModelConfig,
    pub params: ModelParams,
    /// Weight of the transport term, `λ·reg`.
    pub coeff: f64,
}

fn toy_graph<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize, label: usize, seed: u64) -> GraphSample {
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        let j = (i + 1) % n;
        a.set(i, j, 1.0);
        a.set(j, i, 1.0);
    }
    for i in 0..n {
        for j in i + 2..n {
            if rng.random::<f64>() < 0.3 {
                a.set(i, j, 1.0);
                a.set(j, i, 1.0);
            }
        }
    }
    let data = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = Matrix::from_vec(n, d, data).expect("sized buffer");
    let s = synthesize_modality(&x, seed);
    GraphSample { x, a, s, label }
}

fn settings(mode: GradMode) -> ForwardSettings {
    ForwardSettings {
        fusion: Fusion::Max,
        dropout: 0.0,
        distance: Some(DistanceKind::Ot),
        grad_mode: mode,
        reg_mode: RegMode::FixedOne,
    }
}

/// Smallest LP margin over the batch at the given parameters.
fn batch_margin(toy: &NetworkToy, params: &ModelParams) -> Result<f64, TrainError> {
    let mut margin = f64::INFINITY;
    let mut unused = ChaCha8Rng::seed_from_u64(0);
    for g in &toy.graphs {
        let mut tape = Tape::new(Mode::Eval);
        let nodes = params.register(&mut tape);
        let x = tape.input(g.x.clone());
        let z1 = tower_forward(&mut tape, &g.op1, x, &nodes.tower1, 0.0, &mut unused)?;
        let z2 = tower_forward(&mut tape, &g.op2, x, &nodes.tower2, 0.0, &mut unused)?;
        let term = amosl_term(&mut tape, z1, z2, toy.model.fusion, GradMode::Envelope)?;
        margin = margin.min(term.plan.nondegeneracy_margin(&term.cost, &term.w1, &term.w2));
    }
    Ok(margin)
}

/// Deterministic toy batch (5 nodes, 3 features, widths 4/6/8) whose
/// transport problems have a unique optimum with a clear margin.
pub fn network_toy(seed: u64) -> Result<NetworkToy, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = ModelConfig::new(3, 2);
    model.dims = [4, 6, 8];
    model.fc_dim = 8;
    model.dropout = 0.0;
    for attempt in 0..1000u64 {
        let graphs = (0..2)
            .map(|label| {
                let g = toy_graph(&mut rng, 5, 3, label, seed.wrapping_add(attempt));
                PreparedGraph::new(&g, model.conv, SimilarityMode::Dense)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let params = ModelParams::init(&model, &mut rng)?;
        let toy = NetworkToy {
            graphs,
            model: model.clone(),
            params,
            coeff: 0.5,
        };
        if batch_margin(&toy, &toy.params)? > NETWORK_MARGIN {
            return Ok(toy);
        }
    }
    Err(TrainError::InvalidArgument("no non-degenerate toy batch found".into()))
}

/// Batch-mean `L0 + coeff·OT` and its gradient for every parameter tensor.
pub fn network_loss(toy: &NetworkToy, tensors: &[Matrix], mode: GradMode) -> Result<(f64, Vec<Matrix>), TrainError> {
    let params = ModelParams::from_tensors(&toy.model, tensors.to_vec())?;
    let fwd = settings(mode);
    let mut unused = ChaCha8Rng::seed_from_u64(0);
    let mut value = 0.0;
    let mut grads: Vec<Matrix> = tensors.iter().map(|t| Matrix::zeros(t.rows(), t.cols())).collect();
    let scale = 1.0 / toy.graphs.len() as f64;
    for g in &toy.graphs {
        let mut tape = Tape::new(Mode::Train);
        let nodes = params.register(&mut tape);
        let out = forward_sample(&mut tape, g, &nodes, &fwd, &mut unused)?;
        let total = attach_total(&mut tape, &out, toy.coeff)?;
        value += scale * tape.value(total).data()[0];
        let back = tape.backward(total)?;
        for (acc, node) in grads.iter_mut().zip(nodes.all()) {
            acc.add_assign(&back.wrt(node).scale(scale));
        }
    }
    Ok((value, grads))
}

/// Central-difference audit of [`network_loss`].
pub fn network_gradient_audit(mode: GradMode, seed: u64, h: f64) -> Result<GradAudit, TrainError> {
    let toy = network_toy(seed)?;
    let base: Vec<Matrix> = toy.params.tensors().into_iter().cloned().collect();
    Ok(finite_diff_check(|p| network_loss(&toy, p, mode), &base, h)?)
}

/// Every primitive, the transport layer in `mode`, and the whole network.
pub fn gradcheck_suite(mode: GradMode, seed: u64) -> Result<Vec<AuditLine>, TrainError> {
    let mut lines: Vec<AuditLine> = primitive_audits(seed)
        .into_iter()
        .map(|a| AuditLine {
            name: format!("primitive {}", a.name),
            max_relative_error: a.max_relative_error,
            tolerance: PRIMITIVE_TOLERANCE,
        })
        .collect();
    lines.push(AuditLine {
        name: format!("transport gradients ({mode})"),
        max_relative_error: transport_gradient_audit(mode, 40, TRANSPORT_STEP, seed)?,
        tolerance: TRANSPORT_TOLERANCE,
    });
    lines.push(AuditLine {
        name: format!("network loss ({mode})"),
        max_relative_error: network_gradient_audit(mode, seed, NETWORK_STEP)?.max_relative_error,
        tolerance: NETWORK_TOLERANCE,
    });
    Ok(lines)
}
