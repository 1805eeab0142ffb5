//! Training: adaptive transport weight, Adam, cross-validation, ablations,
//! hyperparameter grids, checkpoints and the gradient audit suite.

mod ablation;
mod adam;
mod checkpoint;
mod config;
mod fold;
mod forward;
mod gradcheck;
mod grid;
mod reg;

pub use ablation::{ablation_variants, run_ablation, AblationAxis, AblationRow, AblationTable};
pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use config::{DistanceKind, TrainConfig};
pub use fold::{
    cross_validate, evaluate_graphs, train_fold, EpochRecord, FoldResult, FoldSummary, Report, RunOptions, Split,
};
pub use forward::{
    argmax, attach_total, forward_sample, prepare_graphs, ForwardSettings, PreparedGraph, SampleForward,
};
pub use gradcheck::{
    gradcheck_suite, network_gradient_audit, network_loss, network_toy, AuditLine, NetworkToy, NETWORK_STEP,
    NETWORK_TOLERANCE, PRIMITIVE_TOLERANCE, TRANSPORT_STEP, TRANSPORT_TOLERANCE,
};
pub use grid::{default_gammas, grid_search, GridPoint, GridTable, DEFAULT_LAMBDAS};
pub use reg::{effective_reg, total_loss, update_reg, RegMode, RegState, RegUpdate};

use std::path::PathBuf;

use thiserror::Error;

use crate::gnn::GnnError;
use crate::graph_io::{self, GraphIoError, PreparedDataset};
use crate::ot::OtError;
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite gradient at {0}")]
    NonFiniteGradient(String),
    #[error("fold {0} leaves no training graphs")]
    EmptySplit(usize),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Stream(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Data(#[from] GraphIoError),
    #[error(transparent)]
    Model(#[from] GnnError),
    #[error(transparent)]
    Transport(#[from] OtError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Loads the dataset a config points at: a prepared file is read as is, a
/// directory is parsed as raw benchmark files and prepared with the config
/// seed.
pub fn load_dataset(cfg: &TrainConfig) -> Result<PreparedDataset, TrainError> {
    if cfg.data.is_file() {
        let ds = graph_io::load_prepared(&cfg.data)?;
        if ds.name != cfg.dataset {
            return Err(TrainError::InvalidArgument(format!(
                "{} holds {}, config names {}",
                cfg.data.display(),
                ds.name,
                cfg.dataset
            )));
        }
        return Ok(ds);
    }
    let dir = graph_io::locate_dataset(&cfg.data, &cfg.dataset)
        .ok_or_else(|| GraphIoError::MissingFile(cfg.data.join(&cfg.dataset).join(format!("{}_A.txt", cfg.dataset))))?;
    let raw = graph_io::parse_tudataset(&dir, &cfg.dataset)?;
    Ok(graph_io::prepare(&raw, cfg.features, cfg.seed)?)
}

/// Accuracy and mean cross-entropy of a checkpoint on every graph of a
/// dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalSummary {
    pub graphs: usize,
    pub accuracy: f64,
    pub mean_l0: f64,
}

pub fn evaluate_checkpoint(ckpt: &Checkpoint, ds: &PreparedDataset) -> Result<EvalSummary, TrainError> {
    if ds.feature_dim != ckpt.model.input_dim || ds.num_classes != ckpt.model.num_classes {
        return Err(TrainError::InvalidArgument(format!(
            "model expects {} features and {} classes, dataset has {} and {}",
            ckpt.model.input_dim, ckpt.model.num_classes, ds.feature_dim, ds.num_classes
        )));
    }
    let graphs = prepare_graphs(ds, ckpt.model.conv, ckpt.modality2)?;
    let settings = ForwardSettings {
        fusion: ckpt.model.fusion,
        dropout: ckpt.model.dropout,
        distance: None,
        grad_mode: Default::default(),
        reg_mode: RegMode::Off,
    };
    let all: Vec<usize> = (0..graphs.len()).collect();
    let (mean_l0, _, accuracy, _) = evaluate_graphs(&graphs, &all, &ckpt.params, &settings)?;
    Ok(EvalSummary {
        graphs: graphs.len(),
        accuracy,
        mean_l0,
    })
}

/// Class probabilities of one graph under a checkpoint.
pub fn predict_graph(ckpt: &Checkpoint, sample: &graph_io::GraphSample) -> Result<Vec<f64>, TrainError> {
    if sample.x.cols() != ckpt.model.input_dim {
        return Err(TrainError::InvalidArgument(format!(
            "model expects {} features, graph has {}",
            ckpt.model.input_dim,
            sample.x.cols()
        )));
    }
    let graph = PreparedGraph::new(sample, ckpt.model.conv, ckpt.modality2)?;
    let settings = ForwardSettings {
        fusion: ckpt.model.fusion,
        dropout: ckpt.model.dropout,
        distance: None,
        grad_mode: Default::default(),
        reg_mode: RegMode::Off,
    };
    let mut tape = crate::tensor::Tape::new(crate::tensor::Mode::Eval);
    let nodes = ckpt.params.register(&mut tape);
    let mut unused = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    Ok(forward_sample(&mut tape, &graph, &nodes, &settings, &mut unused)?.probs)
}
