use std::fmt;
use std::str::FromStr;

use super::damped::solve_damped;
use super::simplex::{TransportPlan, EMPTY_MASS};
use super::{validate_instance, OtError};
use crate::tensor::Matrix;

/// Damping used by [`GradMode::KktQp`] unless configured otherwise.
pub const DEFAULT_DAMPING: f64 = 1e-3;

/// How the transport value is differentiated.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum GradMode {
    /// Optimal-value sensitivities of the LP: flows for the costs, duals for
    /// the weights.
    #[default]
    Envelope,
    /// Implicit differentiation of the damped problem through its KKT system.
    KktQp { damping: f64 },
}

impl fmt::Display for GradMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GradMode::Envelope => write!(f, "envelope"),
            GradMode::KktQp { damping } => write!(f, "kkt_qp:{damping}"),
        }
    }
}

impl FromStr for GradMode {
    type Err = OtError;

    /// Accepts `envelope`, `kkt_qp` (default damping) and `kkt_qp:<ε>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "envelope" {
            return Ok(GradMode::Envelope);
        }
        let rest = s
            .strip_prefix("kkt_qp")
            .ok_or_else(|| OtError::Shape(format!("unknown gradient mode `{s}`")))?;
        let damping = match rest.strip_prefix(':') {
            None if rest.is_empty() => DEFAULT_DAMPING,
            Some(eps) => eps
                .parse::<f64>()
                .map_err(|_| OtError::Shape(format!("bad damping in `{s}`")))?,
            None => return Err(OtError::Shape(format!("unknown gradient mode `{s}`"))),
        };
        GradMode::kkt_qp(damping)
    }
}

impl GradMode {
    pub fn kkt_qp(damping: f64) -> Result<Self, OtError> {
        if damping > 0.0 && damping.is_finite() {
            Ok(GradMode::KktQp { damping })
        } else {
            Err(OtError::InvalidDamping(damping))
        }
    }
}

/// `(∂OT/∂C, ∂OT/∂w1, ∂OT/∂w2)`
#[derive(Clone, Debug, PartialEq)]
pub struct TransportGradients {
    pub cost: Matrix,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

/// Differentiates the transport value at an optimal plan.
///
/// At degenerate optima both modes return one subgradient.
pub fn transport_gradients(
    plan: &TransportPlan,
    cost: &Matrix,
    w1: &[f64],
    w2: &[f64],
    mode: GradMode,
) -> Result<TransportGradients, OtError> {
    if let GradMode::KktQp { damping } = mode {
        if !(damping > 0.0 && damping.is_finite()) {
            return Err(OtError::InvalidDamping(damping));
        }
    }
    validate_instance(cost, w1, w2)?;
    check_plan(plan, cost, w1, w2)?;
    match mode {
        GradMode::Envelope => {
            let (g1, g2) = plan.weight_sensitivities();
            Ok(TransportGradients {
                cost: plan.flows.clone(),
                w1: g1,
                w2: g2,
            })
        }
        GradMode::KktQp { damping } => {
            let damped = solve_damped(cost, w1, w2, damping, Some(plan))?;
            let (gc, g1, g2) = damped.value_gradients();
            Ok(TransportGradients {
                cost: gc,
                w1: g1,
                w2: g2,
            })
        }
    }
}

fn check_plan(plan: &TransportPlan, cost: &Matrix, w1: &[f64], w2: &[f64]) -> Result<(), OtError> {
    if plan.flows.shape() != cost.shape() || plan.row_duals.len() != w1.len() || plan.col_duals.len() != w2.len() {
        return Err(OtError::PlanMismatch(format!(
            "plan is {}x{}, instance is {}x{}",
            plan.flows.rows(),
            plan.flows.cols(),
            cost.rows(),
            cost.cols()
        )));
    }
    let mass = w1.iter().sum::<f64>().min(w2.iter().sum());
    let scale = mass.max(1.0);
    if (mass < EMPTY_MASS) != plan.is_empty() || (plan.mass - mass).abs() > 1e-9 * scale {
        return Err(OtError::PlanMismatch(format!(
            "plan ships {} but the instance requires {}",
            plan.mass, mass
        )));
    }
    let infeasible = plan.primal_infeasibility(w1, w2);
    if infeasible > 1e-9 * scale {
        return Err(OtError::PlanMismatch(format!(
            "plan violates the instance constraints by {infeasible:e}"
        )));
    }
    Ok(())
}
