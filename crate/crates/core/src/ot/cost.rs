use super::OtError;
use crate::tensor::{cosine_cost_matrix, Matrix};

/// Pairwise cosine distances between the node embeddings of two modalities.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix(pub Matrix);

impl CostMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

/// `c_ij = 1 − cos(z1_i, z2_j)`; any pair with a row of norm below `1e-12`
/// gets cost 1.
pub fn cost_matrix(z1: &Matrix, z2: &Matrix) -> Result<CostMatrix, OtError> {
    if z1.cols() != z2.cols() {
        return Err(OtError::Shape(format!(
            "feature dimensions differ: {} vs {}",
            z1.cols(),
            z2.cols()
        )));
    }
    Ok(CostMatrix(cosine_cost_matrix(z1, z2)))
}
