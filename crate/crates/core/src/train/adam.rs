use super::TrainError;
use crate::tensor::Matrix;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates, one pair per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub step: u64,
}

impl AdamState {
    pub fn new(shapes: &[(usize, usize)]) -> Self {
        let zeros = || shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect();
        AdamState {
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update. Parameters are left untouched when any
/// gradient entry is non-finite.
pub fn adam_step(
    params: &mut [&mut Matrix],
    grads: &[Matrix],
    state: &mut AdamState,
    lr: f64,
) -> Result<(), TrainError> {
    if params.len() != grads.len() || grads.len() != state.m.len() {
        return Err(TrainError::InvalidArgument(format!(
            "{} parameters, {} gradients, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || g.shape() != state.m[i].shape() {
            return Err(TrainError::InvalidArgument(format!(
                "parameter {i} is {:?} but its gradient is {:?}",
                p.shape(),
                g.shape()
            )));
        }
        if let Some(k) = g.data().iter().position(|v| !v.is_finite()) {
            return Err(TrainError::NonFiniteGradient(format!("parameter {i}, entry {k}")));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for (i, p) in params.iter_mut().enumerate() {
        let g = grads[i].data();
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (k, w) in p.data_mut().iter_mut().enumerate() {
            m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * g[k];
            v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * g[k] * g[k];
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = Matrix::row_vector(&[1.0, -2.0]);
        let mut st = AdamState::new(&[(1, 2)]);
        adam_step(&mut [&mut p], &[Matrix::row_vector(&[3.0, -0.01])], &mut st, 0.1).unwrap();
        assert!((p.get(0, 0) - 0.9).abs() < 1e-6);
        assert!((p.get(0, 1) - -1.9).abs() < 1e-5);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = Matrix::row_vector(&[0.25]);
        let mut st = AdamState::new(&[(1, 1)]);
        for _ in 0..3 {
            adam_step(&mut [&mut p], &[Matrix::zeros(1, 1)], &mut st, 0.1).unwrap();
        }
        assert_eq!(p.get(0, 0), 0.25);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut p = Matrix::row_vector(&[0.25]);
        let mut st = AdamState::new(&[(1, 1)]);
        let err = adam_step(&mut [&mut p], &[Matrix::row_vector(&[f64::NAN])], &mut st, 0.1);
        assert!(matches!(err, Err(TrainError::NonFiniteGradient(_))));
        assert_eq!(p.get(0, 0), 0.25);
        assert_eq!(st.step, 0);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut p = Matrix::row_vector(&[5.0]);
        let mut st = AdamState::new(&[(1, 1)]);
        for _ in 0..2000 {
            let g = Matrix::row_vector(&[2.0 * (p.get(0, 0) - 1.0)]);
            adam_step(&mut [&mut p], &[g], &mut st, 0.05).unwrap();
        }
        assert!((p.get(0, 0) - 1.0).abs() < 1e-2);
    }
}
