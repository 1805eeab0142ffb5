//! Graph convolution towers, modality fusion and the classification head.

mod conv;
mod laplacian;
mod model;

pub use conv::{cheb_conv, chebyshev_basis, gcn_conv};
pub use laplacian::{gcn_propagation, normalized_laplacian, scaled_laplacian};
pub use model::{
    build_modality_operators, classify, compat_and_readout, cross_entropy, fuse, tower_forward, ModalityOperator,
    ModelConfig, ModelParams, ParamNodes, SimilarityMode,
};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GnnError {
    #[error("adjacency matrix is not symmetric")]
    Asymmetric,
    #[error("adjacency matrix must be square and nonnegative: {0}")]
    BadAdjacency(String),
    #[error("Chebyshev degree must be at least 1")]
    ZeroDegree,
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// How the two modality embeddings are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Fusion {
    #[default]
    Max,
    Concat,
    Hadamard,
}

impl fmt::Display for Fusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fusion::Max => "max",
            Fusion::Concat => "concat",
            Fusion::Hadamard => "hadamard",
        })
    }
}

impl FromStr for Fusion {
    type Err = GnnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "max" => Ok(Fusion::Max),
            "concat" => Ok(Fusion::Concat),
            "hadamard" => Ok(Fusion::Hadamard),
            other => Err(GnnError::Config(format!("unknown fusion `{other}`"))),
        }
    }
}

/// Convolution family of the towers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvSpec {
    /// Chebyshev polynomial filter with `k` terms.
    Cheb {
        k: usize,
    },
    Gcn,
}

impl Default for ConvSpec {
    fn default() -> Self {
        ConvSpec::Cheb { k: 6 }
    }
}

impl ConvSpec {
    /// Number of weight slices per layer.
    pub fn slices(self) -> usize {
        match self {
            ConvSpec::Cheb { k } => k,
            ConvSpec::Gcn => 1,
        }
    }
}

impl fmt::Display for ConvSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConvSpec::Cheb { k } => write!(f, "cheb:{k}"),
            ConvSpec::Gcn => f.write_str("gcn"),
        }
    }
}

impl FromStr for ConvSpec {
    type Err = GnnError;

    /// `gcn`, `cheb` (six terms) or `cheb:<k>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "gcn" => Ok(ConvSpec::Gcn),
            "cheb" => Ok(ConvSpec::default()),
            other => {
                let k = other
                    .strip_prefix("cheb:")
                    .and_then(|k| k.parse::<usize>().ok())
                    .ok_or_else(|| GnnError::Config(format!("unknown convolution `{other}`")))?;
                if k == 0 {
                    return Err(GnnError::ZeroDegree);
                }
                Ok(ConvSpec::Cheb { k })
            }
        }
    }
}
