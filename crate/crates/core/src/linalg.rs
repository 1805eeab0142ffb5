//! Small dense solvers for the transport layer's reduced KKT systems.

use crate::tensor::Matrix;

/// Solution of a (possibly singular) symmetric positive semidefinite system.
#[derive(Debug, Clone)]
pub(crate) struct PsdSolution {
    pub x: Vec<f64>,
    /// Largest residual of the equations that were dropped as dependent.
    pub dropped_residual: f64,
}

/// Solves `A x = b` for symmetric PSD `A` by symmetric elimination with
/// diagonal pivoting.
///
/// Pivots are taken from the lowest `priority` class first (largest diagonal
/// within the class). Once every remaining diagonal is below
/// `rel_tol · max diag(A)` the remaining variables are fixed at zero and
/// their equations dropped, which picks one solution of a consistent singular
/// system. The caller controls which variables absorb the null space through
/// `priority`.
pub(crate) fn solve_psd(a: &Matrix, b: &[f64], priority: &[u8], rel_tol: f64) -> PsdSolution {
    let n = a.rows();
    debug_assert_eq!(a.cols(), n);
    debug_assert_eq!(b.len(), n);
    debug_assert_eq!(priority.len(), n);

    let mut m = a.clone();
    let mut rhs = b.to_vec();
    let scale = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
    let tol = rel_tol * scale.max(f64::MIN_POSITIVE);

    let mut remaining: Vec<bool> = vec![true; n];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut classes: Vec<u8> = priority.to_vec();
    classes.sort_unstable();
    classes.dedup();

    'outer: loop {
        let mut chosen = None;
        for &class in &classes {
            let mut best = None;
            let mut best_val = tol;
            for i in 0..n {
                if remaining[i] && priority[i] == class && m.get(i, i) > best_val {
                    best_val = m.get(i, i);
                    best = Some(i);
                }
            }
            if best.is_some() {
                chosen = best;
                break;
            }
        }
        let Some(p) = chosen else {
            break 'outer;
        };
        remaining[p] = false;
        order.push(p);
        let pivot = m.get(p, p);
        for i in 0..n {
            if !remaining[i] {
                continue;
            }
            let factor = m.get(i, p) / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in 0..n {
                if remaining[j] || j == p {
                    let v = m.get(i, j) - factor * m.get(p, j);
                    m.set(i, j, v);
                }
            }
            rhs[i] -= factor * rhs[p];
        }
    }

    let mut x = vec![0.0; n];
    for (k, &p) in order.iter().enumerate().rev() {
        let mut acc = rhs[p];
        for &q in &order[k + 1..] {
            acc -= m.get(p, q) * x[q];
        }
        x[p] = acc / m.get(p, p);
    }

    let dropped_residual = (0..n)
        .filter(|&i| remaining[i])
        .map(|i| rhs[i].abs())
        .fold(0.0, f64::max);

    PsdSolution { x, dropped_residual }
}
