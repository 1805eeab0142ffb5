use super::OtError;
use crate::gnn::Fusion;
use crate::tensor::Matrix;

/// Row sums of an embedding matrix.
pub fn feature_scores(z: &Matrix) -> Vec<f64> {
    z.row_sums()
}

/// Per-node contribution of each modality to the fused representation.
#[derive(Clone, Debug, PartialEq)]
pub struct ContributionScores {
    pub cs1: Vec<f64>,
    pub cs2: Vec<f64>,
    /// `cs1 / d`
    pub normalized1: Vec<f64>,
    /// `cs2 / d`
    pub normalized2: Vec<f64>,
}

/// Counts, per node, how many fused elements each modality supplies.
///
/// Max fusion credits an element to modality 1 when `z1 ≥ z2` and to
/// modality 2 otherwise. Concatenation and Hadamard fusion use every element
/// of both modalities, so each receives half of every element.
pub fn contribution_scores(z1: &Matrix, z2: &Matrix, fusion: Fusion) -> Result<ContributionScores, OtError> {
    if z1.shape() != z2.shape() {
        return Err(OtError::Shape(format!(
            "contribution scores need equal shapes, got {:?} and {:?}",
            z1.shape(),
            z2.shape()
        )));
    }
    let (n, d) = z1.shape();
    let (cs1, cs2): (Vec<f64>, Vec<f64>) = match fusion {
        Fusion::Max => (0..n)
            .map(|r| {
                let first = z1.row(r).iter().zip(z2.row(r)).filter(|(a, b)| a >= b).count();
                (first as f64, (d - first) as f64)
            })
            .unzip(),
        Fusion::Concat | Fusion::Hadamard => {
            let half = d as f64 / 2.0;
            (vec![half; n], vec![half; n])
        }
    };
    let denom = d as f64;
    let norm = |v: &[f64]| -> Vec<f64> {
        if d == 0 {
            vec![0.0; v.len()]
        } else {
            v.iter().map(|c| c / denom).collect()
        }
    };
    Ok(ContributionScores {
        normalized1: norm(&cs1),
        normalized2: norm(&cs2),
        cs1,
        cs2,
    })
}

/// `w_i = max(0, FS_i · ĈS_i)`.
pub fn node_weights(fs: &[f64], cs_hat: &[f64]) -> Result<Vec<f64>, OtError> {
    if fs.len() != cs_hat.len() {
        return Err(OtError::Shape(format!(
            "feature scores ({}) and contribution scores ({}) differ in length",
            fs.len(),
            cs_hat.len()
        )));
    }
    Ok(fs.iter().zip(cs_hat).map(|(f, c)| (f * c).max(0.0)).collect())
}
