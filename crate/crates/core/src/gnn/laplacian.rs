use super::GnnError;
use crate::tensor::Matrix;

const SYMMETRY_TOL: f64 = 1e-12;

fn check_adjacency(a: &Matrix) -> Result<(), GnnError> {
    if a.rows() != a.cols() {
        return Err(GnnError::BadAdjacency(format!("{}x{}", a.rows(), a.cols())));
    }
    if a.data().iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(GnnError::BadAdjacency("negative or non-finite entry".into()));
    }
    if !a.is_symmetric(SYMMETRY_TOL) {
        return Err(GnnError::Asymmetric);
    }
    Ok(())
}

/// `L = I − D^{-1/2} A D^{-1/2}`; isolated nodes keep the unit row `e_i`.
pub fn normalized_laplacian(a: &Matrix) -> Result<Matrix, GnnError> {
    check_adjacency(a)?;
    let n = a.rows();
    let inv_sqrt: Vec<f64> = a
        .row_sums()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let mut l = Matrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            let v = a.get(i, j) * inv_sqrt[i] * inv_sqrt[j];
            if v != 0.0 {
                l.set(i, j, l.get(i, j) - v);
            }
        }
    }
    Ok(l)
}

/// `L̃ = L − I`, i.e. `(2/λ_max) L − I` with the bound `λ_max = 2`.
pub fn scaled_laplacian(l: &Matrix) -> Matrix {
    let mut out = l.clone();
    for i in 0..l.rows().min(l.cols()) {
        out.set(i, i, out.get(i, i) - 1.0);
    }
    out
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` with `D̃` the degree matrix of `A + I`.
pub fn gcn_propagation(a: &Matrix) -> Result<Matrix, GnnError> {
    check_adjacency(a)?;
    let n = a.rows();
    let mut hat = a.clone();
    for i in 0..n {
        hat.set(i, i, hat.get(i, i) + 1.0);
    }
    let deg = hat.row_sums();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, hat.get(i, j) / (deg[i] * deg[j]).sqrt());
        }
    }
    Ok(out)
}
