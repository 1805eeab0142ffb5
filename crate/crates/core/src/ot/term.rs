use super::cost::cost_matrix;
use super::gradients::{transport_gradients, GradMode};
use super::simplex::{solve_transport, TransportPlan};
use super::weights::{contribution_scores, ContributionScores};
use super::OtError;
use crate::gnn::Fusion;
use crate::tensor::{Matrix, Mode, NodeId, Tape};

/// The transport term registered on a tape.
#[derive(Clone, Debug)]
pub struct OtTerm {
    /// `1×1` node holding the transport value.
    pub loss: NodeId,
    pub value: f64,
    pub plan: TransportPlan,
    pub cost: Matrix,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub scores: ContributionScores,
}

/// Adds the structural transport term between two node-embedding matrices.
///
/// Node weights flow through the feature scores only; the contribution scores
/// are piecewise constant and enter as constants. In [`Mode::Eval`] the value
/// is computed but carries no sensitivities.
pub fn amosl_term(
    tape: &mut Tape,
    z1: NodeId,
    z2: NodeId,
    fusion: Fusion,
    grad_mode: GradMode,
) -> Result<OtTerm, OtError> {
    let scores = contribution_scores(tape.value(z1), tape.value(z2), fusion)?;
    let cost = tape.cosine_cost(z1, z2)?;

    let mut weight = |z: NodeId, cs_hat: &[f64]| -> Result<NodeId, OtError> {
        let fs = tape.row_sum(z);
        let cs = tape.input(Matrix::column_vector(cs_hat));
        let prod = tape.hadamard(fs, cs)?;
        Ok(tape.relu(prod))
    };
    let w1 = weight(z1, &scores.normalized1)?;
    let w2 = weight(z2, &scores.normalized2)?;

    let c = tape.value(cost).clone();
    let wv1 = tape.value(w1).data().to_vec();
    let wv2 = tape.value(w2).data().to_vec();
    let plan = solve_transport(&c, &wv1, &wv2)?;
    let (n1, n2) = c.shape();
    let (gc, g1, g2) = match tape.mode() {
        Mode::Eval => (Matrix::zeros(n1, n2), vec![0.0; n1], vec![0.0; n2]),
        Mode::Train => {
            let g = transport_gradients(&plan, &c, &wv1, &wv2, grad_mode)?;
            (g.cost, g.w1, g.w2)
        }
    };
    let loss = tape.ot_loss(
        cost,
        w1,
        w2,
        plan.value,
        gc,
        Matrix::column_vector(&g1),
        Matrix::column_vector(&g2),
    )?;
    Ok(OtTerm {
        loss,
        value: plan.value,
        plan,
        cost: c,
        w1: wv1,
        w2: wv2,
        scores,
    })
}

/// Transport value and its gradients with respect to both embedding matrices.
pub fn amosl_term_grad(
    z1: &Matrix,
    z2: &Matrix,
    fusion: Fusion,
    grad_mode: GradMode,
) -> Result<(f64, Matrix, Matrix), OtError> {
    cost_matrix(z1, z2)?;
    let mut tape = Tape::new(Mode::Train);
    let a = tape.input(z1.clone());
    let b = tape.input(z2.clone());
    let term = amosl_term(&mut tape, a, b, fusion, grad_mode)?;
    let grads = tape.backward(term.loss)?;
    Ok((term.value, grads.wrt(a), grads.wrt(b)))
}
