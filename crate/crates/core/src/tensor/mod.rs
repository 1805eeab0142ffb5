//! Dense `f64` matrices and a small reverse-mode tape.
//!
//! The tape only knows the ops the classification pipeline needs. Every
//! forward pass owns its own [`Tape`]; randomness (dropout masks) comes from
//! generators passed in by the caller.

mod audit;
mod gradcheck;
mod matrix;
mod tape;

pub use audit::{primitive_audits, PrimitiveAudit};
pub use gradcheck::{finite_diff_check, GradAudit};
pub use matrix::Matrix;
pub use tape::{softmax, Gradients, Mode, NodeId, OpKind, RowMetric, Tape, COSINE_ZERO_NORM};

pub(crate) use tape::{aligned_distance_value, cosine_cost_matrix};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: shape mismatch between {}x{} and {}x{}", left.0, left.1, right.0, right.1)]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{rows}x{cols} matrix needs {} values, got {len}", rows * cols)]
    DataLength { rows: usize, cols: usize, len: usize },
    #[error("backward needs a 1x1 loss, got {}x{}", shape.0, shape.1)]
    NonScalarLoss { shape: (usize, usize) },
    #[error("gradient audit invalid: {0}")]
    AuditInvalid(String),
    #[error("{0}")]
    InvalidArgument(String),
}
