use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use amosl::graph_io::{self, FeaturePolicy};
use amosl::ot::{oracle_trials, GradMode, DEFAULT_DAMPING};
use amosl::train::{
    cross_validate, default_gammas, evaluate_checkpoint, gradcheck_suite, grid_search, load_checkpoint, load_dataset,
    run_ablation, save_checkpoint, AblationAxis, Checkpoint, EpochRecord, RunOptions, TrainConfig, TrainError,
    DEFAULT_LAMBDAS,
};

#[derive(Parser)]
#[command(
    name = "amosl",
    version,
    about = "Two-view graph classification with optimal-transport structure learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Envelope,
    #[value(name = "kkt_qp", alias = "kkt-qp")]
    KktQp,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Distance,
    Adaptive,
    Fusion,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw benchmark files, synthesize the second modality and save the result.
    Prepare {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        name: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// auto, onehot, attributes or concat.
        #[arg(long, default_value = "auto")]
        features: String,
    },
    /// Cross-validate a configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long, default_value = "amosl-run")]
        out: PathBuf,
        /// Record wall-clock milliseconds in the metrics stream.
        #[arg(long)]
        timing: bool,
    },
    /// Accuracy of a checkpoint on a prepared dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Finite-difference audit of every gradient path.
    Gradcheck {
        #[arg(long, value_enum, default_value = "kkt_qp")]
        mode: ModeArg,
        /// Damping of the regularized transport problem in kkt-qp mode.
        #[arg(long, default_value_t = DEFAULT_DAMPING)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Matched runs differing along one axis.
    Ablate {
        #[arg(long, value_enum)]
        axis: AxisArg,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validate every (gamma, lambda) pair of a grid.
    Grid {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        folds: Option<usize>,
        /// Comma-separated decay rates; defaults to 0.01, 0.02, ..., 0.99.
        #[arg(long, value_delimiter = ',')]
        gammas: Vec<f64>,
        /// Comma-separated transport weights; defaults to 5e-2 down to 1e-5.
        #[arg(long, value_delimiter = ',')]
        lambdas: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the transport solver with exhaustive enumeration.
    OtOracle {
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(path: &Path, folds: Option<usize>) -> Result<TrainConfig, TrainError> {
    let mut cfg = TrainConfig::load(path)?;
    if let Some(k) = folds {
        cfg.folds = k;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<(), TrainError> {
    fs::create_dir_all(dir).map_err(|e| TrainError::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn create_file(path: &Path) -> Result<BufWriter<fs::File>, TrainError> {
    fs::File::create(path).map(BufWriter::new).map_err(|e| TrainError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Observer writing one JSON object per line, flushed after each record.
fn ndjson_sink(mut w: impl Write) -> impl FnMut(&EpochRecord) -> Result<(), TrainError> {
    move |r| {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

fn run(command: Command) -> Result<ExitCode, TrainError> {
    match command {
        Command::Prepare {
            data_dir,
            name,
            seed,
            out,
            features,
        } => {
            let policy: FeaturePolicy = features.parse()?;
            let dir = graph_io::locate_dataset(&data_dir, &name)
                .ok_or_else(|| graph_io::GraphIoError::MissingFile(data_dir.join(format!("{name}_A.txt"))))?;
            let raw = graph_io::parse_tudataset(&dir, &name)?;
            let ds = graph_io::prepare(&raw, policy, seed)?;
            graph_io::save_prepared(&ds, &out)?;
            println!(
                "{}: {} graphs, {} classes, {:.2} nodes on average, {} features -> {}",
                ds.name,
                ds.graphs.len(),
                ds.num_classes,
                ds.avg_nodes(),
                ds.feature_dim,
                out.display()
            );
        }
        Command::Train {
            config,
            folds,
            out,
            timing,
        } => {
            let cfg = load_config(&config, folds)?;
            let ds = load_dataset(&cfg)?;
            create_dir(&out)?;
            let mut sink = ndjson_sink(create_file(&out.join("metrics.ndjson"))?);
            let (report, results) = cross_validate(&ds, &cfg, RunOptions { timing }, &mut sink)?;
            for r in &results {
                let ckpt = Checkpoint {
                    model: r.model.clone(),
                    modality2: cfg.modality2,
                    params: r.params.clone(),
                };
                save_checkpoint(&ckpt, &out.join(format!("fold_{}.ckpt", r.fold)))?;
            }
            let mut w = create_file(&out.join("report.json"))?;
            serde_json::to_writer_pretty(&mut w, &report)?;
            w.write_all(b"\n")?;
            w.flush()?;
            println!(
                "{} {}-fold accuracy {} (mean distance {:.4}) -> {}",
                report.dataset,
                cfg.folds,
                report.accuracy_line(),
                report.mean_ot_distance,
                out.display()
            );
        }
        Command::Eval { model, data } => {
            let ckpt = load_checkpoint(&model)?;
            let ds = graph_io::load_prepared(&data)?;
            let s = evaluate_checkpoint(&ckpt, &ds)?;
            println!(
                "{}: accuracy {:.4} on {} graphs (mean cross-entropy {:.4})",
                ds.name, s.accuracy, s.graphs, s.mean_l0
            );
        }
        Command::Gradcheck { mode, eps, seed } => {
            let mode = match mode {
                ModeArg::Envelope => GradMode::Envelope,
                ModeArg::KktQp => GradMode::kkt_qp(eps)?,
            };
            let lines = gradcheck_suite(mode, seed)?;
            let mut ok = true;
            for l in &lines {
                ok &= l.passed();
                println!(
                    "{} {:<40} max rel err {:.3e} (tol {:.0e})",
                    if l.passed() { "PASS" } else { "FAIL" },
                    l.name,
                    l.max_relative_error,
                    l.tolerance
                );
            }
            if !ok {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Ablate {
            axis,
            config,
            folds,
            out,
        } => {
            let cfg = load_config(&config, folds)?;
            let ds = load_dataset(&cfg)?;
            let axis = match axis {
                AxisArg::Distance => AblationAxis::Distance,
                AxisArg::Adaptive => AblationAxis::Adaptive,
                AxisArg::Fusion => AblationAxis::Fusion,
            };
            let table = match &out {
                Some(dir) => {
                    create_dir(dir)?;
                    let mut sink = ndjson_sink(create_file(&dir.join(format!("ablation_{axis}.ndjson")))?);
                    run_ablation(&ds, &cfg, axis, RunOptions::default(), &mut sink)?
                }
                None => run_ablation(&ds, &cfg, axis, RunOptions::default(), &mut |_| Ok(()))?,
            };
            print!("{table}");
            if let Some(dir) = &out {
                let mut w = create_file(&dir.join(format!("ablation_{axis}.json")))?;
                serde_json::to_writer_pretty(&mut w, &table)?;
                w.write_all(b"\n")?;
                w.flush()?;
            }
        }
        Command::Grid {
            config,
            folds,
            mut gammas,
            mut lambdas,
            out,
        } => {
            let cfg = load_config(&config, folds)?;
            let ds = load_dataset(&cfg)?;
            if gammas.is_empty() {
                gammas = default_gammas();
            }
            if lambdas.is_empty() {
                lambdas = DEFAULT_LAMBDAS.to_vec();
            }
            let table = match &out {
                Some(dir) => {
                    create_dir(dir)?;
                    let mut sink = ndjson_sink(create_file(&dir.join("grid.ndjson"))?);
                    grid_search(&ds, &cfg, &gammas, &lambdas, RunOptions::default(), &mut sink)?
                }
                None => grid_search(&ds, &cfg, &gammas, &lambdas, RunOptions::default(), &mut |_| Ok(()))?,
            };
            print!("{table}");
            if let Some(dir) = &out {
                let mut w = create_file(&dir.join("grid.json"))?;
                serde_json::to_writer_pretty(&mut w, &table)?;
                w.write_all(b"\n")?;
                w.flush()?;
            }
        }
        Command::OtOracle { trials, seed } => {
            let r = oracle_trials(trials, seed)?;
            println!(
                "{} trials, max |simplex - enumeration| = {:.3e}, {} mismatches",
                r.trials, r.max_abs_error, r.failures
            );
            if r.failures > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
