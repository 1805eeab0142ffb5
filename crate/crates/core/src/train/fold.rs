use std::fmt;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::adam::{adam_step, AdamState};
use super::config::TrainConfig;
use super::forward::{attach_total, forward_sample, prepare_graphs, ForwardSettings, PreparedGraph};
use super::reg::{effective_reg, update_reg, RegMode, RegState, RegUpdate};
use super::TrainError;
use crate::gnn::{ModelConfig, ModelParams};
use crate::graph_io::{make_folds, FoldSplit, PreparedDataset};
use crate::tensor::{Matrix, Mode, Tape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// One line of the metrics stream.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub run_id: String,
    pub fold: usize,
    /// 1-based.
    pub epoch: usize,
    pub split: Split,
    /// Mean cross-entropy.
    pub l0: f64,
    /// Mean structural distance between the tower outputs.
    pub ot_distance: f64,
    /// Transport weight in effect at the end of the epoch.
    pub reg: f64,
    pub lambda: f64,
    pub accuracy: f64,
    /// Milliseconds since the fold started; 0 unless timing is enabled.
    pub wall_ms: u64,
}

/// Options that do not change the numerical result.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub timing: bool,
}

/// Outcome of training on one fold.
#[derive(Clone, Debug)]
pub struct FoldResult {
    pub fold: usize,
    /// Test accuracy after the last epoch.
    pub test_accuracy: f64,
    /// Mean test-split structural distance after the last epoch.
    pub final_ot_distance: f64,
    pub final_reg: f64,
    pub train_size: usize,
    pub test_size: usize,
    pub records: Vec<EpochRecord>,
    pub model: ModelConfig,
    pub params: ModelParams,
}

#[derive(Default)]
struct Totals {
    l0: f64,
    distance: f64,
    correct: usize,
    count: usize,
}

impl Totals {
    fn add(&mut self, l0: f64, distance: f64, correct: bool) {
        self.l0 += l0;
        self.distance += distance;
        self.correct += usize::from(correct);
        self.count += 1;
    }

    fn mean(&self, v: f64) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            v / self.count as f64
        }
    }
}

fn settings(cfg: &TrainConfig) -> ForwardSettings {
    ForwardSettings {
        fusion: cfg.fusion,
        dropout: cfg.dropout,
        distance: Some(cfg.distance),
        grad_mode: cfg.grad_mode,
        reg_mode: cfg.reg_mode,
    }
}

/// Inference over `indices`; returns (mean L0, mean distance, accuracy, mean
/// true-class probability). Does not touch any random state.
pub fn evaluate_graphs(
    graphs: &[PreparedGraph],
    indices: &[usize],
    params: &ModelParams,
    settings: &ForwardSettings,
) -> Result<(f64, f64, f64, f64), TrainError> {
    let mut totals = Totals::default();
    let mut p_sum = 0.0;
    let mut unused = ChaCha8Rng::seed_from_u64(0);
    for &i in indices {
        let mut tape = Tape::new(Mode::Eval);
        let nodes = params.register(&mut tape);
        let out = forward_sample(&mut tape, &graphs[i], &nodes, settings, &mut unused)?;
        totals.add(out.l0_value, out.distance_value, out.correct);
        p_sum += out.p_true;
    }
    Ok((
        totals.mean(totals.l0),
        totals.mean(totals.distance),
        totals.mean(totals.correct as f64),
        totals.mean(p_sum),
    ))
}

/// Trains on the out-of-fold graphs and evaluates on the fold after every
/// epoch. `observer` sees every record as soon as it is produced.
pub fn train_fold(
    graphs: &[PreparedGraph],
    dataset: &PreparedDataset,
    split: &FoldSplit,
    fold: usize,
    cfg: &TrainConfig,
    opts: RunOptions,
    observer: &mut dyn FnMut(&EpochRecord) -> Result<(), TrainError>,
) -> Result<FoldResult, TrainError> {
    if fold >= split.k {
        return Err(TrainError::InvalidArgument(format!("fold {fold} out of {}", split.k)));
    }
    let train_idx = split.train_indices(fold);
    let test_idx = split.test_indices(fold);
    if train_idx.is_empty() {
        return Err(TrainError::EmptySplit(fold));
    }
    let started = Instant::now();
    let run_id = cfg.run_id();
    let model = cfg.model_config(dataset.feature_dim, dataset.num_classes);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ fold as u64);
    let mut params = ModelParams::init(&model, &mut rng)?;
    let shapes: Vec<(usize, usize)> = model.layout().into_iter().map(|(_, s)| s).collect();
    let mut adam = AdamState::new(&shapes);
    let mut reg = RegState::new(cfg.gamma)?;
    let fwd = settings(cfg);
    let eval_fwd = fwd;
    let mut order = train_idx.clone();
    let mut records = Vec::with_capacity(2 * cfg.epochs);
    let mut last_test = (0.0, 0.0);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        if cfg.reg_mode == RegMode::Adaptive && cfg.reg_update == RegUpdate::Epoch {
            let (.., p_mean) = evaluate_graphs(graphs, &train_idx, &params, &eval_fwd)?;
            reg = update_reg(&reg, p_mean.clamp(0.0, 1.0))?;
        }
        let mut totals = Totals::default();
        for batch in order.chunks(cfg.batch_size) {
            let mut passes = Vec::with_capacity(batch.len());
            for &i in batch {
                let mut tape = Tape::new(Mode::Train);
                let nodes = params.register(&mut tape);
                let out = forward_sample(&mut tape, &graphs[i], &nodes, &fwd, &mut rng)?;
                passes.push((tape, nodes, out));
            }
            if cfg.reg_mode == RegMode::Adaptive && cfg.reg_update == RegUpdate::Batch {
                let p_mean = passes.iter().map(|p| p.2.p_true).sum::<f64>() / passes.len() as f64;
                reg = update_reg(&reg, p_mean.clamp(0.0, 1.0))?;
            }
            let coeff = cfg.lambda * effective_reg(cfg.reg_mode, &reg);
            let mut grads: Vec<Matrix> = shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect();
            for (tape, nodes, out) in &mut passes {
                let total = attach_total(tape, out, coeff)?;
                let g = tape.backward(total)?;
                for (acc, node) in grads.iter_mut().zip(nodes.all()) {
                    acc.add_assign(&g.wrt(node));
                }
                totals.add(out.l0_value, out.distance_value, out.correct);
            }
            let inv = 1.0 / passes.len() as f64;
            let grads: Vec<Matrix> = grads.iter().map(|g| g.scale(inv)).collect();
            adam_step(&mut params.tensors_mut(), &grads, &mut adam, cfg.learning_rate)?;
        }

        let shown_reg = effective_reg(cfg.reg_mode, &reg);
        let wall_ms = if opts.timing {
            started.elapsed().as_millis() as u64
        } else {
            0
        };
        let train_rec = EpochRecord {
            run_id: run_id.clone(),
            fold,
            epoch,
            split: Split::Train,
            l0: totals.mean(totals.l0),
            ot_distance: totals.mean(totals.distance),
            reg: shown_reg,
            lambda: cfg.lambda,
            accuracy: totals.mean(totals.correct as f64),
            wall_ms,
        };
        observer(&train_rec)?;
        records.push(train_rec);

        let (l0, distance, accuracy, _) = evaluate_graphs(graphs, &test_idx, &params, &eval_fwd)?;
        last_test = (accuracy, distance);
        let test_rec = EpochRecord {
            run_id: run_id.clone(),
            fold,
            epoch,
            split: Split::Test,
            l0,
            ot_distance: distance,
            reg: shown_reg,
            lambda: cfg.lambda,
            accuracy,
            wall_ms,
        };
        observer(&test_rec)?;
        records.push(test_rec);
    }

    Ok(FoldResult {
        fold,
        test_accuracy: last_test.0,
        final_ot_distance: last_test.1,
        final_reg: effective_reg(cfg.reg_mode, &reg),
        train_size: train_idx.len(),
        test_size: test_idx.len(),
        records,
        model,
        params,
    })
}

/// Per-fold line of a [`Report`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub test_accuracy: f64,
    pub final_ot_distance: f64,
    pub final_reg: f64,
    pub train_size: usize,
    pub test_size: usize,
}

/// Cross-validation summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub run_id: String,
    pub dataset: String,
    pub folds: Vec<FoldSummary>,
    pub mean_accuracy: f64,
    /// Population standard deviation over folds.
    pub std_accuracy: f64,
    pub mean_ot_distance: f64,
}

impl Report {
    pub fn from_folds(run_id: String, dataset: String, folds: Vec<FoldSummary>) -> Self {
        let (mean_accuracy, std_accuracy) = mean_std(folds.iter().map(|f| f.test_accuracy));
        let (mean_ot_distance, _) = mean_std(folds.iter().map(|f| f.final_ot_distance));
        Report {
            run_id,
            dataset,
            folds,
            mean_accuracy,
            std_accuracy,
            mean_ot_distance,
        }
    }

    /// `mean ± std` in percent.
    pub fn accuracy_line(&self) -> String {
        format!("{:.1} ± {:.1}", 100.0 * self.mean_accuracy, 100.0 * self.std_accuracy)
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Trains every fold of a stratified split seeded by `cfg.seed`.
pub fn cross_validate(
    dataset: &PreparedDataset,
    cfg: &TrainConfig,
    opts: RunOptions,
    observer: &mut dyn FnMut(&EpochRecord) -> Result<(), TrainError>,
) -> Result<(Report, Vec<FoldResult>), TrainError> {
    cfg.validate()?;
    let graphs = prepare_graphs(dataset, cfg.conv, cfg.modality2)?;
    let split = make_folds(&dataset.labels(), cfg.folds, cfg.seed)?;
    let mut results = Vec::with_capacity(cfg.folds);
    for fold in 0..cfg.folds {
        results.push(train_fold(&graphs, dataset, &split, fold, cfg, opts, observer)?);
    }
    let summaries = results
        .iter()
        .map(|r| FoldSummary {
            fold: r.fold,
            test_accuracy: r.test_accuracy,
            final_ot_distance: r.final_ot_distance,
            final_reg: r.final_reg,
            train_size: r.train_size,
            test_size: r.test_size,
        })
        .collect();
    Ok((
        Report::from_folds(cfg.run_id(), dataset.name.clone(), summaries),
        results,
    ))
}
