use std::fmt;
use std::str::FromStr;

use super::TrainError;

/// How the transport term is weighted in the loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RegMode {
    /// Momentum-smoothed classifier uncertainty.
    #[default]
    Adaptive,
    /// Constant weight 1.
    FixedOne,
    /// Term dropped from the loss.
    Off,
}

impl fmt::Display for RegMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegMode::Adaptive => "adaptive",
            RegMode::FixedOne => "fixed_one",
            RegMode::Off => "off",
        })
    }
}

impl FromStr for RegMode {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "adaptive" => Ok(RegMode::Adaptive),
            "fixed_one" => Ok(RegMode::FixedOne),
            "off" => Ok(RegMode::Off),
            other => Err(TrainError::InvalidArgument(format!("unknown reg mode `{other}`"))),
        }
    }
}

/// When the adaptive weight is refreshed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RegUpdate {
    /// Once per mini-batch from the batch mean of the true-class probability.
    #[default]
    Batch,
    /// Once per epoch from the training-set mean, measured before the epoch.
    Epoch,
}

impl fmt::Display for RegUpdate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegUpdate::Batch => "batch",
            RegUpdate::Epoch => "epoch",
        })
    }
}

impl FromStr for RegUpdate {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "batch" => Ok(RegUpdate::Batch),
            "epoch" => Ok(RegUpdate::Epoch),
            other => Err(TrainError::InvalidArgument(format!("unknown reg update `{other}`"))),
        }
    }
}

/// Momentum state of the adaptive transport weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegState {
    pub reg: f64,
    pub gamma: f64,
    /// Number of updates applied so far.
    pub t: u64,
}

impl RegState {
    pub fn new(gamma: f64) -> Result<Self, TrainError> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(TrainError::InvalidArgument(format!("gamma {gamma} must lie in [0, 1)")));
        }
        Ok(RegState { reg: 1.0, gamma, t: 0 })
    }
}

/// `reg ← 1 − p̄` on the first update, `reg ← γ·reg + (1 − γ)(1 − p̄)` after.
pub fn update_reg(state: &RegState, p_true_mean: f64) -> Result<RegState, TrainError> {
    if !(0.0..=1.0).contains(&p_true_mean) {
        return Err(TrainError::InvalidArgument(format!(
            "true-class probability {p_true_mean} outside [0, 1]"
        )));
    }
    let target = 1.0 - p_true_mean;
    let reg = if state.t == 0 {
        target
    } else {
        state.gamma * state.reg + (1.0 - state.gamma) * target
    };
    Ok(RegState {
        reg: reg.clamp(0.0, 1.0),
        gamma: state.gamma,
        t: state.t + 1,
    })
}

/// Weight multiplying the transport term for the given mode.
pub fn effective_reg(mode: RegMode, state: &RegState) -> f64 {
    match mode {
        RegMode::Adaptive => state.reg,
        RegMode::FixedOne => 1.0,
        RegMode::Off => 0.0,
    }
}

/// `L0 + λ·reg·ot`.
pub fn total_loss(l0: f64, reg: f64, ot: f64, lambda: f64) -> f64 {
    l0 + lambda * reg * ot
}
