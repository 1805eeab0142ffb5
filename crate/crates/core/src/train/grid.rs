use std::fmt;

use serde::Serialize;

use super::config::TrainConfig;
use super::fold::{cross_validate, EpochRecord, RunOptions};
use super::TrainError;
use crate::graph_io::PreparedDataset;

/// Momentum decay rates 0.01, 0.02, …, 0.99.
pub fn default_gammas() -> Vec<f64> {
    (1..100).map(|i| i as f64 / 100.0).collect()
}

/// Transport weights from 5e-2 down to 1e-5 in 5/1 steps.
pub const DEFAULT_LAMBDAS: [f64; 8] = [5e-2, 1e-2, 5e-3, 1e-3, 5e-4, 1e-4, 5e-5, 1e-5];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridPoint {
    pub gamma: f64,
    pub lambda: f64,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_ot_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridTable {
    pub dataset: String,
    pub points: Vec<GridPoint>,
}

impl GridTable {
    /// Highest mean accuracy; the earliest point wins ties.
    pub fn best(&self) -> Option<&GridPoint> {
        self.points.iter().fold(None, |best: Option<&GridPoint>, p| match best {
            Some(b) if b.mean_accuracy >= p.mean_accuracy => Some(b),
            _ => Some(p),
        })
    }
}

impl fmt::Display for GridTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "gamma/lambda grid on {}", self.dataset)?;
        writeln!(
            f,
            "{:>6} {:>8} {:>16} {:>12}",
            "gamma", "lambda", "accuracy (%)", "distance"
        )?;
        for p in &self.points {
            writeln!(
                f,
                "{:>6} {:>8.0e} {:>8.1} ± {:<5.1} {:>12.4}",
                p.gamma,
                p.lambda,
                100.0 * p.mean_accuracy,
                100.0 * p.std_accuracy,
                p.mean_ot_distance
            )?;
        }
        if let Some(b) = self.best() {
            writeln!(f, "best: gamma {} lambda {:e}", b.gamma, b.lambda)?;
        }
        Ok(())
    }
}

/// Cross-validates `base` at every `(γ, λ)` pair, γ varying slowest.
pub fn grid_search(
    dataset: &PreparedDataset,
    base: &TrainConfig,
    gammas: &[f64],
    lambdas: &[f64],
    opts: RunOptions,
    observer: &mut dyn FnMut(&EpochRecord) -> Result<(), TrainError>,
) -> Result<GridTable, TrainError> {
    if gammas.is_empty() || lambdas.is_empty() {
        return Err(TrainError::InvalidArgument(
            "grid needs at least one gamma and one lambda".into(),
        ));
    }
    let configs = gammas
        .iter()
        .flat_map(|&gamma| {
            lambdas.iter().map(move |&lambda| TrainConfig {
                gamma,
                lambda,
                ..base.clone()
            })
        })
        .map(|c| c.validate().map(|_| c))
        .collect::<Result<Vec<_>, _>>()?;
    let mut points = Vec::with_capacity(configs.len());
    for cfg in &configs {
        let (report, _) = cross_validate(dataset, cfg, opts, observer)?;
        points.push(GridPoint {
            gamma: cfg.gamma,
            lambda: cfg.lambda,
            mean_accuracy: report.mean_accuracy,
            std_accuracy: report.std_accuracy,
            mean_ot_distance: report.mean_ot_distance,
        });
    }
    Ok(GridTable {
        dataset: dataset.name.clone(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grids_lie_in_the_valid_ranges() {
        let g = default_gammas();
        assert_eq!(g.len(), 99);
        assert_eq!((g[0], g[98]), (0.01, 0.99));
        for &gamma in &g {
            for lambda in DEFAULT_LAMBDAS {
                let cfg = TrainConfig {
                    gamma,
                    lambda,
                    ..TrainConfig::default()
                };
                assert!(cfg.validate().is_ok(), "{gamma} {lambda}");
            }
        }
    }

    #[test]
    fn best_prefers_first_on_ties() {
        let p = |gamma, acc| GridPoint {
            gamma,
            lambda: 1e-3,
            mean_accuracy: acc,
            std_accuracy: 0.0,
            mean_ot_distance: 0.0,
        };
        let t = GridTable {
            dataset: "X".into(),
            points: vec![p(0.1, 0.5), p(0.2, 0.8), p(0.3, 0.8)],
        };
        assert_eq!(t.best().unwrap().gamma, 0.2);
        assert!(GridTable {
            dataset: "X".into(),
            points: vec![]
        }
        .best()
        .is_none());
    }

    #[test]
    fn invalid_points_are_rejected_before_training() {
        let ds = PreparedDataset {
            name: "EMPTY".into(),
            num_classes: 2,
            feature_dim: 1,
            graphs: vec![],
        };
        let base = TrainConfig::default();
        let err = grid_search(&ds, &base, &[1.0], &[1e-3], RunOptions::default(), &mut |_| Ok(()));
        assert!(matches!(err, Err(TrainError::InvalidArgument(_))));
        assert!(grid_search(&ds, &base, &[], &[1e-3], RunOptions::default(), &mut |_| Ok(())).is_err());
    }
}
