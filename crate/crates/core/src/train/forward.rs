use rand::Rng;

use super::config::DistanceKind;
use super::reg::RegMode;
use super::TrainError;
use crate::gnn::{
    build_modality_operators, classify, compat_and_readout, fuse, tower_forward, ConvSpec, Fusion, ModalityOperator,
    ParamNodes, SimilarityMode,
};
use crate::graph_io::{GraphSample, PreparedDataset};
use crate::ot::{amosl_term, GradMode};
use crate::tensor::{Matrix, Mode, NodeId, Tape};

/// A graph with its convolution operators precomputed.
#[derive(Clone, Debug)]
pub struct PreparedGraph {
    pub x: Matrix,
    pub op1: ModalityOperator,
    pub op2: ModalityOperator,
    pub label: usize,
}

impl PreparedGraph {
    pub fn new(sample: &GraphSample, conv: ConvSpec, modality2: SimilarityMode) -> Result<Self, TrainError> {
        let (op1, op2) = build_modality_operators(&sample.a, &sample.s, conv, modality2)?;
        Ok(PreparedGraph {
            x: sample.x.clone(),
            op1,
            op2,
            label: sample.label,
        })
    }
}

pub fn prepare_graphs(
    ds: &PreparedDataset,
    conv: ConvSpec,
    modality2: SimilarityMode,
) -> Result<Vec<PreparedGraph>, TrainError> {
    ds.graphs
        .iter()
        .map(|g| PreparedGraph::new(g, conv, modality2))
        .collect()
}

/// Settings of one forward pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForwardSettings {
    pub fusion: Fusion,
    pub dropout: f64,
    /// Structural distance between the towers; `None` skips it.
    pub distance: Option<DistanceKind>,
    pub grad_mode: GradMode,
    pub reg_mode: RegMode,
}

/// Nodes and values produced by [`forward_sample`].
#[derive(Clone, Debug)]
pub struct SampleForward {
    /// Cross-entropy node.
    pub l0: NodeId,
    /// Structural distance node when it takes part in the loss.
    pub distance: Option<NodeId>,
    pub l0_value: f64,
    /// Structural distance value, also computed when it is not in the loss.
    pub distance_value: f64,
    pub probs: Vec<f64>,
    pub p_true: f64,
    pub correct: bool,
}

/// Both towers, the structural distance between their outputs, fusion,
/// readout and classifier. With `RegMode::Off` the distance is measured on
/// detached copies of the tower outputs and never enters the loss graph.
pub fn forward_sample<R: Rng + ?Sized>(
    tape: &mut Tape,
    graph: &PreparedGraph,
    params: &ParamNodes,
    settings: &ForwardSettings,
    rng: &mut R,
) -> Result<SampleForward, TrainError> {
    let x = tape.input(graph.x.clone());
    let z1 = tower_forward(tape, &graph.op1, x, &params.tower1, settings.dropout, rng)?;
    let z2 = tower_forward(tape, &graph.op2, x, &params.tower2, settings.dropout, rng)?;

    let (distance, distance_value) = match settings.distance {
        None => (None, 0.0),
        Some(kind) if settings.reg_mode == RegMode::Off => {
            let v = detached_distance(tape.value(z1), tape.value(z2), kind, settings)?;
            (None, v)
        }
        Some(kind) => {
            let node = distance_node(tape, z1, z2, kind, settings)?;
            (Some(node), tape.value(node).data()[0])
        }
    };

    let fused = fuse(tape, z1, z2, settings.fusion)?;
    let h = compat_and_readout(tape, fused, params.fc1_w, params.fc1_b, settings.dropout, rng)?;
    let logits = classify(tape, h, params.cls_w, params.cls_b)?;
    let l0 = tape.softmax_cross_entropy(logits, graph.label)?;
    let probs = tape.softmax_probs(l0).expect("cross-entropy node").to_vec();
    let predicted = argmax(&probs);
    Ok(SampleForward {
        l0,
        distance,
        l0_value: tape.value(l0).data()[0],
        distance_value,
        p_true: probs[graph.label],
        correct: predicted == graph.label,
        probs,
    })
}

fn distance_node(
    tape: &mut Tape,
    z1: NodeId,
    z2: NodeId,
    kind: DistanceKind,
    settings: &ForwardSettings,
) -> Result<NodeId, TrainError> {
    Ok(match kind {
        DistanceKind::Ot => amosl_term(tape, z1, z2, settings.fusion, settings.grad_mode)?.loss,
        DistanceKind::Aligned(metric) => tape.aligned_distance(z1, z2, metric)?,
    })
}

fn detached_distance(
    z1: &Matrix,
    z2: &Matrix,
    kind: DistanceKind,
    settings: &ForwardSettings,
) -> Result<f64, TrainError> {
    let mut scratch = Tape::new(Mode::Eval);
    let a = scratch.input(z1.clone());
    let b = scratch.input(z2.clone());
    let node = distance_node(&mut scratch, a, b, kind, settings)?;
    Ok(scratch.value(node).data()[0])
}

/// Index of the largest probability; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// `L0 + coeff·distance` on the tape, where `coeff = λ·reg`.
pub fn attach_total(tape: &mut Tape, fwd: &SampleForward, coeff: f64) -> Result<NodeId, TrainError> {
    match fwd.distance {
        None => Ok(fwd.l0),
        Some(d) => {
            let scaled = tape.scalar_scale(d, coeff);
            Ok(tape.add(fwd.l0, scaled)?)
        }
    }
}
