use std::fmt;
use std::str::FromStr;

use super::OtError;
use crate::tensor::{aligned_distance_value, Matrix};

/// Row metric for the aligned-node distance.
pub use crate::tensor::RowMetric as DistanceMetric;

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceMetric::Manhattan => "manhattan",
            DistanceMetric::Euclidean => "euclidean",
            DistanceMetric::Cosine => "cosine",
        })
    }
}

impl FromStr for DistanceMetric {
    type Err = OtError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "manhattan" => Ok(DistanceMetric::Manhattan),
            "euclidean" => Ok(DistanceMetric::Euclidean),
            "cosine" => Ok(DistanceMetric::Cosine),
            other => Err(OtError::Shape(format!("unknown distance metric `{other}`"))),
        }
    }
}

/// `Σ_i metric(z1_i, z2_i)`: node `i` of one modality is matched to node `i`
/// of the other.
pub fn modality_distance(z1: &Matrix, z2: &Matrix, metric: DistanceMetric) -> Result<f64, OtError> {
    if z1.shape() != z2.shape() {
        return Err(OtError::Shape(format!(
            "aligned distance needs equal shapes, got {:?} and {:?}",
            z1.shape(),
            z2.shape()
        )));
    }
    Ok(aligned_distance_value(z1, z2, metric))
}
