use super::laplacian::gcn_propagation;
use super::GnnError;
use crate::tensor::Matrix;

/// `T_0 … T_{k−1}` of `L̃` by the Chebyshev recursion
/// `T_k = 2 L̃ T_{k−1} − T_{k−2}`.
pub fn chebyshev_basis(l_tilde: &Matrix, k: usize) -> Result<Vec<Matrix>, GnnError> {
    if k == 0 {
        return Err(GnnError::ZeroDegree);
    }
    let n = l_tilde.rows();
    let mut basis = vec![Matrix::identity(n)];
    if k > 1 {
        basis.push(l_tilde.clone());
    }
    while basis.len() < k {
        let t = basis.len();
        let next = l_tilde
            .matmul(&basis[t - 1])?
            .scale(2.0)
            .zip_with(&basis[t - 2], "chebyshev", |a, b| a - b)?;
        basis.push(next);
    }
    Ok(basis)
}

/// `Z = Σ_k T_k(L̃) X Θ_k`.
pub fn cheb_conv(l_tilde: &Matrix, x: &Matrix, theta: &[Matrix]) -> Result<Matrix, GnnError> {
    let basis = chebyshev_basis(l_tilde, theta.len())?;
    let mut z: Option<Matrix> = None;
    for (t, th) in basis.iter().zip(theta) {
        let term = t.matmul(x)?.matmul(th)?;
        match z.as_mut() {
            Some(acc) => acc.add_assign(&term),
            None => z = Some(term),
        }
    }
    Ok(z.expect("at least one slice"))
}

/// `Z = D̃^{-1/2} (A + I) D̃^{-1/2} X W`.
pub fn gcn_conv(a: &Matrix, x: &Matrix, w: &Matrix) -> Result<Matrix, GnnError> {
    Ok(gcn_propagation(a)?.matmul(x)?.matmul(w)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::{normalized_laplacian, scaled_laplacian};

    fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        a.shape() == b.shape() && a.data().iter().zip(b.data()).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn single_slice_is_linear_map() {
        let l = Matrix::from_rows(&[&[0.0, -1.0], &[-1.0, 0.0]]);
        let x = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, -1.0]]);
        let th = Matrix::from_rows(&[&[0.5], &[-2.0]]);
        assert_eq!(
            cheb_conv(&l, &x, std::slice::from_ref(&th)).unwrap(),
            x.matmul(&th).unwrap()
        );
    }

    #[test]
    fn empty_graph_drops_first_order_term() {
        let l = scaled_laplacian(&normalized_laplacian(&Matrix::zeros(2, 2)).unwrap());
        let x = Matrix::from_rows(&[&[1.0], &[2.0]]);
        let t0 = Matrix::from_rows(&[&[3.0]]);
        let t1 = Matrix::from_rows(&[&[7.0]]);
        assert_eq!(cheb_conv(&l, &x, &[t0.clone(), t1]).unwrap(), x.matmul(&t0).unwrap());
    }

    #[test]
    fn three_terms_match_explicit_polynomial() {
        let a = Matrix::from_rows(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 1.0], &[0.0, 1.0, 0.0]]);
        let l = scaled_laplacian(&normalized_laplacian(&a).unwrap());
        let x = Matrix::from_rows(&[&[1.0, 0.0], &[0.5, 2.0], &[-1.0, 1.0]]);
        let th: Vec<Matrix> = (0..3)
            .map(|k| Matrix::from_rows(&[&[1.0 + k as f64, -0.5], &[0.25, k as f64 - 1.0]]))
            .collect();
        // T_2 = 2 L̃² − I written out entrywise
        let l2 = l.matmul(&l).unwrap();
        let mut t2 = Matrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                t2.set(i, j, 2.0 * l2.get(i, j) - if i == j { 1.0 } else { 0.0 });
            }
        }
        let mut expect = x.matmul(&th[0]).unwrap();
        expect.add_assign(&l.matmul(&x).unwrap().matmul(&th[1]).unwrap());
        expect.add_assign(&t2.matmul(&x).unwrap().matmul(&th[2]).unwrap());
        assert!(close(&cheb_conv(&l, &x, &th).unwrap(), &expect, 1e-12));
    }

    #[test]
    fn zero_degree_rejected() {
        assert_eq!(chebyshev_basis(&Matrix::zeros(2, 2), 0), Err(GnnError::ZeroDegree));
        assert!(cheb_conv(&Matrix::zeros(2, 2), &Matrix::zeros(2, 1), &[]).is_err());
    }

    #[test]
    fn gcn_reference_values() {
        let one = Matrix::from_rows(&[&[0.0]]);
        let x = Matrix::from_rows(&[&[2.0, 3.0]]);
        let w = Matrix::from_rows(&[&[1.0], &[-1.0]]);
        assert_eq!(gcn_conv(&one, &x, &w).unwrap(), x.matmul(&w).unwrap());

        let edge = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let unit = Matrix::from_rows(&[&[1.0]]);
        let z = gcn_conv(&edge, &Matrix::column_vector(&[1.0, 0.0]), &unit).unwrap();
        assert_eq!(z, Matrix::column_vector(&[0.5, 0.5]));
        let z = gcn_conv(&edge, &Matrix::column_vector(&[1.0, 1.0]), &unit).unwrap();
        assert_eq!(z, Matrix::column_vector(&[1.0, 1.0]));
    }
}
