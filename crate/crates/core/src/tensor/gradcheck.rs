use std::fmt::Display;

use super::{Matrix, TensorError};

/// Outcome of a central-difference audit.
#[derive(Clone, Debug, PartialEq)]
pub struct GradAudit {
    /// `max |analytic − fd| / max(1, |fd|)` over every audited entry.
    pub max_relative_error: f64,
    /// `(parameter index, flat entry index)` of the worst entry.
    pub worst: Option<(usize, usize)>,
    pub entries: usize,
}

/// Compares analytic gradients against central differences.
///
/// `f` maps parameter values to `(value, gradients)`, one gradient per
/// parameter with matching shape. It is evaluated twice at `params` first; any
/// bitwise difference between the two evaluations means the function is not
/// deterministic and the audit is rejected.
pub fn finite_diff_check<F, E>(mut f: F, params: &[Matrix], h: f64) -> Result<GradAudit, TensorError>
where
    F: FnMut(&[Matrix]) -> Result<(f64, Vec<Matrix>), E>,
    E: Display,
{
    if h.is_nan() || h <= 0.0 {
        return Err(TensorError::InvalidArgument(format!("step {h} must be positive")));
    }
    let eval = |f: &mut F, p: &[Matrix]| f(p).map_err(|e| TensorError::AuditInvalid(e.to_string()));

    let (v0, g0) = eval(&mut f, params)?;
    let (v1, g1) = eval(&mut f, params)?;
    let same_grads = g0.len() == g1.len()
        && g0.iter().zip(&g1).all(|(a, b)| {
            a.shape() == b.shape() && a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits())
        });
    if v0.to_bits() != v1.to_bits() || !same_grads {
        return Err(TensorError::AuditInvalid(
            "function is not deterministic at the base point".into(),
        ));
    }
    if g0.len() != params.len() {
        return Err(TensorError::AuditInvalid(format!(
            "expected {} gradients, got {}",
            params.len(),
            g0.len()
        )));
    }
    for (p, g) in params.iter().zip(&g0) {
        if p.shape() != g.shape() {
            return Err(TensorError::AuditInvalid(format!(
                "gradient shape {:?} does not match parameter shape {:?}",
                g.shape(),
                p.shape()
            )));
        }
    }

    let mut probe: Vec<Matrix> = params.to_vec();
    let mut audit = GradAudit {
        max_relative_error: 0.0,
        worst: None,
        entries: 0,
    };
    for (pi, grad) in g0.iter().enumerate() {
        for k in 0..grad.len() {
            let base = probe[pi].data()[k];
            probe[pi].data_mut()[k] = base + h;
            let (up, _) = eval(&mut f, &probe)?;
            probe[pi].data_mut()[k] = base - h;
            let (down, _) = eval(&mut f, &probe)?;
            probe[pi].data_mut()[k] = base;

            let fd = (up - down) / (2.0 * h);
            let err = (grad.data()[k] - fd).abs() / fd.abs().max(1.0);
            audit.entries += 1;
            if audit.worst.is_none() || err > audit.max_relative_error {
                audit.max_relative_error = err;
                audit.worst = Some((pi, k));
            }
        }
    }
    Ok(audit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    #[test]
    fn quadratic_is_exact_up_to_roundoff() {
        let audit = finite_diff_check(
            |p: &[Matrix]| {
                let x = p[0].data()[0];
                Ok::<_, TensorError>((x * x, vec![Matrix::scalar(2.0 * x)]))
            },
            &[Matrix::scalar(3.0)],
            1e-5,
        )
        .unwrap();
        assert!(audit.max_relative_error < 1e-8, "{audit:?}");
        assert_eq!(audit.entries, 1);
    }

    #[test]
    fn nondeterministic_function_is_rejected() {
        let counter = Cell::new(0.0);
        let err = finite_diff_check(
            |p: &[Matrix]| {
                counter.set(counter.get() + 1.0);
                Ok::<_, TensorError>((p[0].data()[0] + counter.get(), vec![Matrix::scalar(1.0)]))
            },
            &[Matrix::scalar(1.0)],
            1e-5,
        )
        .unwrap_err();
        assert!(matches!(err, TensorError::AuditInvalid(_)));
    }

    #[test]
    fn wrong_gradient_is_reported() {
        let audit = finite_diff_check(
            |p: &[Matrix]| {
                let x = p[0].data()[0];
                Ok::<_, TensorError>((x * x, vec![Matrix::scalar(x)]))
            },
            &[Matrix::scalar(3.0)],
            1e-5,
        )
        .unwrap();
        assert!(audit.max_relative_error > 0.4);
        assert_eq!(audit.worst, Some((0, 0)));
    }

    #[test]
    fn nonpositive_step_rejected() {
        let r = finite_diff_check(|_: &[Matrix]| Ok::<_, TensorError>((0.0, vec![])), &[], 0.0);
        assert!(r.is_err());
    }
}
