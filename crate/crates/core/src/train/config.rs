use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use super::reg::{RegMode, RegUpdate};
use super::TrainError;
use crate::gnn::{ConvSpec, Fusion, ModelConfig, SimilarityMode};
use crate::graph_io::FeaturePolicy;
use crate::ot::{DistanceMetric, GradMode};

/// Structural distance between the two tower outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DistanceKind {
    /// Weighted partial optimal transport.
    #[default]
    Ot,
    /// Row-aligned metric, node `i` against node `i`.
    Aligned(DistanceMetric),
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistanceKind::Ot => f.write_str("ot"),
            DistanceKind::Aligned(m) => m.fmt(f),
        }
    }
}

impl FromStr for DistanceKind {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "ot" => Ok(DistanceKind::Ot),
            other => other
                .parse::<DistanceMetric>()
                .map(DistanceKind::Aligned)
                .map_err(|_| TrainError::InvalidArgument(format!("unknown distance `{other}`"))),
        }
    }
}

/// Every knob of a cross-validation run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub dataset: String,
    /// Prepared dataset file, or a directory holding the raw benchmark files.
    pub data: PathBuf,
    pub features: FeaturePolicy,
    pub conv: ConvSpec,
    pub modality2: SimilarityMode,
    pub fusion: Fusion,
    pub dims: [usize; 3],
    pub fc_dim: usize,
    pub dropout: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub folds: usize,
    pub grad_mode: GradMode,
    pub reg_mode: RegMode,
    pub reg_update: RegUpdate,
    pub distance: DistanceKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dataset: "MUTAG".into(),
            data: PathBuf::from("data"),
            features: FeaturePolicy::Auto,
            conv: ConvSpec::default(),
            modality2: SimilarityMode::Dense,
            fusion: Fusion::Max,
            dims: [16, 64, 128],
            fc_dim: 128,
            dropout: 0.1,
            lambda: 5e-3,
            gamma: 0.9,
            learning_rate: 5e-3,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            folds: 10,
            grad_mode: GradMode::Envelope,
            reg_mode: RegMode::Adaptive,
            reg_update: RegUpdate::Batch,
            distance: DistanceKind::Ot,
        }
    }
}

const KEYS: &[&str] = &[
    "dataset",
    "data",
    "features",
    "conv",
    "cheb_k",
    "modality2",
    "fusion",
    "dims",
    "fc_dim",
    "dropout",
    "lambda",
    "gamma",
    "learning_rate",
    "epochs",
    "batch_size",
    "seed",
    "folds",
    "grad_mode",
    "reg_mode",
    "reg_update",
    "distance",
];

fn value<T: FromStr>(raw: &str, line: usize, key: &str) -> Result<T, TrainError>
where
    T::Err: fmt::Display,
{
    raw.parse::<T>().map_err(|e| TrainError::Config {
        line,
        msg: format!("{key}: {e}"),
    })
}

fn number<T: FromStr>(raw: &str, line: usize, key: &str) -> Result<T, TrainError> {
    raw.parse::<T>().map_err(|_| TrainError::Config {
        line,
        msg: format!("{key}: `{raw}` is not a valid number"),
    })
}

impl TrainConfig {
    /// Parses `key = value` lines; `#` starts a comment. Relative `data`
    /// paths are taken relative to `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self, TrainError> {
        let mut cfg = TrainConfig::default();
        let mut cheb_k: Option<(usize, usize)> = None;
        let mut seen: Vec<&str> = Vec::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, raw)) = content.split_once('=') else {
                return Err(TrainError::Config {
                    line,
                    msg: format!("expected `key = value`, found `{content}`"),
                });
            };
            let (key, raw) = (key.trim(), raw.trim());
            let Some(&known) = KEYS.iter().find(|k| **k == key) else {
                return Err(TrainError::Config {
                    line,
                    msg: format!("unknown key `{key}`"),
                });
            };
            if seen.contains(&known) {
                return Err(TrainError::Config {
                    line,
                    msg: format!("duplicate key `{key}`"),
                });
            }
            seen.push(known);
            match known {
                "dataset" => cfg.dataset = raw.to_string(),
                "data" => {
                    let p = PathBuf::from(raw);
                    cfg.data = match base {
                        Some(b) if p.is_relative() => b.join(p),
                        _ => p,
                    };
                }
                "features" => cfg.features = value(raw, line, key)?,
                "conv" => cfg.conv = value(raw, line, key)?,
                "cheb_k" => cheb_k = Some((number(raw, line, key)?, line)),
                "modality2" => cfg.modality2 = value(raw, line, key)?,
                "fusion" => cfg.fusion = value(raw, line, key)?,
                "dims" => {
                    let parts: Vec<usize> = raw
                        .split(',')
                        .map(|p| number(p.trim(), line, key))
                        .collect::<Result<_, _>>()?;
                    cfg.dims = parts.try_into().map_err(|_| TrainError::Config {
                        line,
                        msg: "dims needs exactly three comma-separated widths".into(),
                    })?;
                }
                "fc_dim" => cfg.fc_dim = number(raw, line, key)?,
                "dropout" => cfg.dropout = number(raw, line, key)?,
                "lambda" => cfg.lambda = number(raw, line, key)?,
                "gamma" => cfg.gamma = number(raw, line, key)?,
                "learning_rate" => cfg.learning_rate = number(raw, line, key)?,
                "epochs" => cfg.epochs = number(raw, line, key)?,
                "batch_size" => cfg.batch_size = number(raw, line, key)?,
                "seed" => cfg.seed = number(raw, line, key)?,
                "folds" => cfg.folds = number(raw, line, key)?,
                "grad_mode" => cfg.grad_mode = value(raw, line, key)?,
                "reg_mode" => cfg.reg_mode = value(raw, line, key)?,
                "reg_update" => cfg.reg_update = value(raw, line, key)?,
                "distance" => cfg.distance = value(raw, line, key)?,
                _ => unreachable!("key list and match arms agree"),
            }
        }
        if let Some((k, line)) = cheb_k {
            match cfg.conv {
                ConvSpec::Cheb { .. } if k >= 1 => cfg.conv = ConvSpec::Cheb { k },
                ConvSpec::Cheb { .. } => {
                    return Err(TrainError::Config {
                        line,
                        msg: "cheb_k must be at least 1".into(),
                    })
                }
                ConvSpec::Gcn => {
                    return Err(TrainError::Config {
                        line,
                        msg: "cheb_k given for a gcn model".into(),
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let text = std::fs::read_to_string(path).map_err(|e| TrainError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        TrainConfig::parse(&text, path.parent())
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::InvalidArgument(msg));
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return bad(format!("lambda {} must lie in (0, 1)", self.lambda));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma {} must lie in [0, 1)", self.gamma));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch size must be at least 1".into());
        }
        if self.folds < 2 {
            return bad(format!("need at least 2 folds, got {}", self.folds));
        }
        if self.dataset.is_empty() || self.dataset.contains(char::is_whitespace) {
            return bad(format!("dataset name `{}` must be one word", self.dataset));
        }
        self.model_config(1, 2).validate()?;
        Ok(())
    }

    pub fn model_config(&self, input_dim: usize, num_classes: usize) -> ModelConfig {
        ModelConfig {
            input_dim,
            num_classes,
            conv: self.conv,
            fusion: self.fusion,
            dims: self.dims,
            fc_dim: self.fc_dim,
            dropout: self.dropout,
        }
    }

    /// Canonical `key = value` text; parsing it yields the same config.
    pub fn to_text(&self) -> String {
        let (conv, k) = match self.conv {
            ConvSpec::Cheb { k } => ("cheb", Some(k)),
            ConvSpec::Gcn => ("gcn", None),
        };
        let mut out = String::new();
        let mut put = |key: &str, v: String| out.push_str(&format!("{key} = {v}\n"));
        put("dataset", self.dataset.clone());
        put("data", self.data.display().to_string());
        put("features", self.features.to_string());
        put("conv", conv.into());
        if let Some(k) = k {
            put("cheb_k", k.to_string());
        }
        put("modality2", self.modality2.to_string());
        put("fusion", self.fusion.to_string());
        put("dims", format!("{},{},{}", self.dims[0], self.dims[1], self.dims[2]));
        put("fc_dim", self.fc_dim.to_string());
        put("dropout", format!("{:?}", self.dropout));
        put("lambda", format!("{:?}", self.lambda));
        put("gamma", format!("{:?}", self.gamma));
        put("learning_rate", format!("{:?}", self.learning_rate));
        put("epochs", self.epochs.to_string());
        put("batch_size", self.batch_size.to_string());
        put("seed", self.seed.to_string());
        put("folds", self.folds.to_string());
        put("grad_mode", self.grad_mode.to_string());
        put("reg_mode", self.reg_mode.to_string());
        put("reg_update", self.reg_update.to_string());
        put("distance", self.distance.to_string());
        out
    }

    /// First 16 hex digits of the SHA-256 of [`TrainConfig::to_text`].
    pub fn run_id(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
