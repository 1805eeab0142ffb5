//! Modality-wise structure learning through optimal transport.
//!
//! Node embeddings of the two modalities are compared with a cosine cost,
//! each node gets a weight from its feature score and its contribution to
//! the fused representation, and the partial transportation LP between the
//! two weighted node sets yields the structural distance together with the
//! node correspondences (the support of the optimal flow).
//!
//! Gradients through the LP come in two flavours, see [`GradMode`].

mod audit;
mod brute;
mod cost;
mod damped;
mod distance;
mod gradients;
mod simplex;
mod term;
mod weights;

pub use audit::{
    duality_trials, oracle_trials, random_integral_instance, random_nondegenerate_instance, random_real_instance,
    transport_gradient_audit, DualityReport, OracleReport,
};
pub use brute::{brute_force_transport, BRUTE_FORCE_MAX_DIM, BRUTE_FORCE_MAX_MASS};
pub use cost::{cost_matrix, CostMatrix};
pub use damped::{solve_damped_transport, DampedPlan};
pub use distance::{modality_distance, DistanceMetric};
pub use gradients::{transport_gradients, GradMode, TransportGradients, DEFAULT_DAMPING};
pub use simplex::{ot_value, solve_transport, MassSide, TransportPlan, EMPTY_MASS, SUPPORT_TOL};
pub use term::{amosl_term, amosl_term_grad, OtTerm};
pub use weights::{contribution_scores, feature_scores, node_weights, ContributionScores};

use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OtError {
    #[error("{side} weight {index} is negative ({value})")]
    NegativeWeight {
        side: &'static str,
        index: usize,
        value: f64,
    },
    #[error("{side} weight {index} is not finite")]
    NonFiniteWeight { side: &'static str, index: usize },
    #[error("cost entry ({row}, {col}) is not finite")]
    NonFiniteCost { row: usize, col: usize },
    #[error("{0}")]
    Shape(String),
    #[error("transportation simplex exceeded {0} pivots")]
    IterationLimit(usize),
    #[error("damped transport solve did not converge: {0}")]
    DampedNoConvergence(String),
    #[error("damping must be positive, got {0}")]
    InvalidDamping(f64),
    #[error("plan does not match instance: {0}")]
    PlanMismatch(String),
    #[error("instance too large for enumeration: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub(crate) fn validate_instance(cost: &crate::tensor::Matrix, w1: &[f64], w2: &[f64]) -> Result<(), OtError> {
    if cost.rows() != w1.len() || cost.cols() != w2.len() {
        return Err(OtError::Shape(format!(
            "cost is {}x{} but weights have lengths {} and {}",
            cost.rows(),
            cost.cols(),
            w1.len(),
            w2.len()
        )));
    }
    for (side, w) in [("row", w1), ("column", w2)] {
        for (index, &value) in w.iter().enumerate() {
            if !value.is_finite() {
                return Err(OtError::NonFiniteWeight { side, index });
            }
            if value < 0.0 {
                return Err(OtError::NegativeWeight { side, index, value });
            }
        }
    }
    for row in 0..cost.rows() {
        for (col, v) in cost.row(row).iter().enumerate() {
            if !v.is_finite() {
                return Err(OtError::NonFiniteCost { row, col });
            }
        }
    }
    Ok(())
}
