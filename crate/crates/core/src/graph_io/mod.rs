//! Loading graph-classification benchmarks in the TUDataset flat-file layout,
//! node features, the synthesized similarity modality, stratified folds and
//! a binary cache of prepared datasets.

mod features;
mod folds;
mod prepared;
mod tudataset;

pub use features::{
    build_features, prepare, synthesize_modality, synthesize_modality_with_metric, synthesize_modality_with_rng,
    FeaturePolicy,
};
pub use folds::{make_folds, FoldSplit};
pub use prepared::{load_prepared, read_prepared, save_prepared, write_prepared, PREPARED_MAGIC, PREPARED_VERSION};
pub use tudataset::{locate_dataset, parse_tudataset, RawDataset};

use std::path::PathBuf;

use thiserror::Error;

use crate::tensor::Matrix;

#[derive(Debug, Error)]
pub enum GraphIoError {
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{}:{line}: {msg}", file.display())]
    Parse { file: PathBuf, line: usize, msg: String },
    #[error("{}:{line}: edge ({u}, {v}) joins nodes of different graphs", file.display())]
    CrossGraphEdge {
        file: PathBuf,
        line: usize,
        u: usize,
        v: usize,
    },
    #[error("unsupported dataset: {0}")]
    Unsupported(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("not a prepared dataset file: {0}")]
    Format(String),
    #[error("prepared dataset version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("prepared dataset file is truncated")]
    Truncated,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One graph with both modalities.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphSample {
    /// `n×d` node features.
    pub x: Matrix,
    /// `n×n` symmetric 0/1 adjacency with zero diagonal.
    pub a: Matrix,
    /// `n×n` similarity of the synthesized modality, unit diagonal.
    pub s: Matrix,
    pub label: usize,
}

impl GraphSample {
    pub fn nodes(&self) -> usize {
        self.x.rows()
    }
}

/// A dataset ready for training.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedDataset {
    pub name: String,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub graphs: Vec<GraphSample>,
}

impl PreparedDataset {
    pub fn labels(&self) -> Vec<usize> {
        self.graphs.iter().map(|g| g.label).collect()
    }

    pub fn avg_nodes(&self) -> f64 {
        if self.graphs.is_empty() {
            return 0.0;
        }
        self.graphs.iter().map(|g| g.nodes() as f64).sum::<f64>() / self.graphs.len() as f64
    }
}
