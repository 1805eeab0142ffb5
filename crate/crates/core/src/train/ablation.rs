use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::config::{DistanceKind, TrainConfig};
use super::fold::{cross_validate, EpochRecord, RunOptions};
use super::reg::RegMode;
use super::TrainError;
use crate::gnn::Fusion;
use crate::graph_io::PreparedDataset;
use crate::ot::DistanceMetric;

/// Which configuration knob an ablation varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AblationAxis {
    /// Aligned row metrics against optimal transport.
    Distance,
    /// Fixed unit weight against the adaptive weight.
    Adaptive,
    /// Every fusion technique with and without the transport term.
    Fusion,
}

impl fmt::Display for AblationAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AblationAxis::Distance => "distance",
            AblationAxis::Adaptive => "adaptive",
            AblationAxis::Fusion => "fusion",
        })
    }
}

impl FromStr for AblationAxis {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "distance" => Ok(AblationAxis::Distance),
            "adaptive" => Ok(AblationAxis::Adaptive),
            "fusion" => Ok(AblationAxis::Fusion),
            other => Err(TrainError::InvalidArgument(format!("unknown ablation axis `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub label: String,
    pub distance: String,
    pub reg_mode: String,
    pub fusion: String,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    /// Final test-split structural distance, averaged over folds.
    pub mean_ot_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationTable {
    pub axis: String,
    pub dataset: String,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, label: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

impl fmt::Display for AblationTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} ablation on {}", self.axis, self.dataset)?;
        writeln!(f, "{:<24} {:>16} {:>12}", "run", "accuracy (%)", "distance")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<24} {:>8.1} ± {:<5.1} {:>12.4}",
                r.label,
                100.0 * r.mean_accuracy,
                100.0 * r.std_accuracy,
                r.mean_ot_distance
            )?;
        }
        Ok(())
    }
}

/// Configurations compared along `axis`, each differing from `base` only on
/// that axis.
pub fn ablation_variants(base: &TrainConfig, axis: AblationAxis) -> Vec<(String, TrainConfig)> {
    let with = |f: &dyn Fn(&mut TrainConfig)| {
        let mut c = base.clone();
        f(&mut c);
        c
    };
    match axis {
        AblationAxis::Distance => [
            DistanceKind::Aligned(DistanceMetric::Manhattan),
            DistanceKind::Aligned(DistanceMetric::Euclidean),
            DistanceKind::Aligned(DistanceMetric::Cosine),
            DistanceKind::Ot,
        ]
        .into_iter()
        .map(|d| (d.to_string(), with(&|c| c.distance = d)))
        .collect(),
        AblationAxis::Adaptive => vec![
            ("fixed".into(), with(&|c| c.reg_mode = RegMode::FixedOne)),
            ("adaptive".into(), with(&|c| c.reg_mode = RegMode::Adaptive)),
        ],
        AblationAxis::Fusion => {
            let mut out = Vec::new();
            for fusion in [Fusion::Max, Fusion::Concat, Fusion::Hadamard] {
                out.push((
                    format!("{fusion} without"),
                    with(&|c| {
                        c.fusion = fusion;
                        c.reg_mode = RegMode::Off;
                    }),
                ));
                let reg = if base.reg_mode == RegMode::Off {
                    RegMode::Adaptive
                } else {
                    base.reg_mode
                };
                out.push((
                    format!("{fusion} with"),
                    with(&|c| {
                        c.fusion = fusion;
                        c.reg_mode = reg;
                    }),
                ));
            }
            out
        }
    }
}

/// Cross-validates every variant of `axis`.
pub fn run_ablation(
    dataset: &PreparedDataset,
    base: &TrainConfig,
    axis: AblationAxis,
    opts: RunOptions,
    observer: &mut dyn FnMut(&EpochRecord) -> Result<(), TrainError>,
) -> Result<AblationTable, TrainError> {
    let mut rows = Vec::new();
    for (label, cfg) in ablation_variants(base, axis) {
        let (report, _) = cross_validate(dataset, &cfg, opts, observer)?;
        rows.push(AblationRow {
            label,
            distance: cfg.distance.to_string(),
            reg_mode: cfg.reg_mode.to_string(),
            fusion: cfg.fusion.to_string(),
            mean_accuracy: report.mean_accuracy,
            std_accuracy: report.std_accuracy,
            mean_ot_distance: report.mean_ot_distance,
        });
    }
    Ok(AblationTable {
        axis: axis.to_string(),
        dataset: dataset.name.clone(),
        rows,
    })
}
