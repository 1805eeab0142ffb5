use std::collections::HashMap;

use super::simplex::EMPTY_MASS;
use super::{validate_instance, OtError};
use crate::tensor::Matrix;

/// Largest number of rows or columns accepted by [`brute_force_transport`].
pub const BRUTE_FORCE_MAX_DIM: usize = 4;
/// Largest lighter-side mass accepted by [`brute_force_transport`].
pub const BRUTE_FORCE_MAX_MASS: u32 = 12;

/// Optimal transport value by exhaustive search over integral flows.
///
/// Integral weights have an integral optimal vertex, so the minimum over
/// integral feasible flows is the LP optimum.
pub fn brute_force_transport(cost: &Matrix, w1: &[f64], w2: &[f64]) -> Result<f64, OtError> {
    validate_instance(cost, w1, w2)?;
    let (n1, n2) = cost.shape();
    if n1 > BRUTE_FORCE_MAX_DIM || n2 > BRUTE_FORCE_MAX_DIM {
        return Err(OtError::TooLarge(format!(
            "{n1}x{n2} exceeds {BRUTE_FORCE_MAX_DIM}x{BRUTE_FORCE_MAX_DIM}"
        )));
    }
    let rows = integral(w1, "row")?;
    let cols = integral(w2, "column")?;
    let mass = rows.iter().sum::<u32>().min(cols.iter().sum());
    if mass > BRUTE_FORCE_MAX_MASS {
        return Err(OtError::TooLarge(format!("mass {mass} exceeds {BRUTE_FORCE_MAX_MASS}")));
    }
    if (mass as f64) < EMPTY_MASS {
        return Ok(0.0);
    }
    let caps: Vec<u32> = cols.iter().map(|&c| c.min(mass)).collect();
    let mut search = Search {
        cost,
        rows: &rows,
        memo: HashMap::new(),
    };
    Ok(search.best(0, caps, mass))
}

fn integral(w: &[f64], side: &'static str) -> Result<Vec<u32>, OtError> {
    w.iter()
        .enumerate()
        .map(|(index, &v)| {
            let r = v.round();
            if (v - r).abs() > 1e-9 || r > u32::MAX as f64 {
                Err(OtError::TooLarge(format!(
                    "{side} weight {index} = {v} is not a small integer"
                )))
            } else {
                Ok(r as u32)
            }
        })
        .collect()
}

struct Search<'a> {
    cost: &'a Matrix,
    rows: &'a [u32],
    memo: HashMap<(usize, Vec<u32>, u32), f64>,
}

impl Search<'_> {
    /// Cheapest way to ship `need` units from rows `i..` into columns with
    /// remaining capacities `caps`.
    fn best(&mut self, i: usize, caps: Vec<u32>, need: u32) -> f64 {
        if need == 0 {
            return 0.0;
        }
        if i == self.rows.len() {
            return f64::INFINITY;
        }
        let caps: Vec<u32> = caps.into_iter().map(|c| c.min(need)).collect();
        let key = (i, caps.clone(), need);
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let limit = self.rows[i].min(need);
        let mut out = f64::INFINITY;
        let mut x = vec![0u32; caps.len()];
        self.enumerate(i, &caps, need, limit, 0, &mut x, &mut out);
        self.memo.insert(key, out);
        out
    }

    /// Visits every shipment vector `x ≤ caps` of row `i` with `Σx ≤ limit`.
    #[allow(clippy::too_many_arguments)]
    fn enumerate(&mut self, i: usize, caps: &[u32], need: u32, limit: u32, j: usize, x: &mut Vec<u32>, out: &mut f64) {
        if j == caps.len() {
            let shipped: u32 = x.iter().sum();
            let here: f64 = x.iter().enumerate().map(|(k, &q)| self.cost.get(i, k) * q as f64).sum();
            let rest_caps: Vec<u32> = caps.iter().zip(x.iter()).map(|(c, q)| c - q).collect();
            let rest = self.best(i + 1, rest_caps, need - shipped);
            if here + rest < *out {
                *out = here + rest;
            }
            return;
        }
        let used: u32 = x[..j].iter().sum();
        for q in 0..=caps[j].min(limit - used) {
            x[j] = q;
            self.enumerate(i, caps, need, limit, j + 1, x, out);
        }
        x[j] = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_reference() {
        let c = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 1.0]]);
        assert_eq!(brute_force_transport(&c, &[2.0, 1.0], &[1.0, 2.0]).unwrap(), 4.0);
    }

    #[test]
    fn zero_supply() {
        let c = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 1.0]]);
        assert_eq!(brute_force_transport(&c, &[0.0, 0.0], &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn single_route() {
        let c = Matrix::from_rows(&[&[0.75]]);
        assert_eq!(brute_force_transport(&c, &[5.0], &[5.0]).unwrap(), 3.75);
    }

    #[test]
    fn limits_enforced() {
        let big = Matrix::zeros(5, 1);
        assert!(matches!(
            brute_force_transport(&big, &[1.0; 5], &[1.0]),
            Err(OtError::TooLarge(_))
        ));
        let c = Matrix::zeros(1, 1);
        assert!(brute_force_transport(&c, &[13.0], &[20.0]).is_err());
        assert!(brute_force_transport(&c, &[0.5], &[1.0]).is_err());
        // heavy side may exceed the mass bound
        assert!(brute_force_transport(&c, &[12.0], &[1000.0]).is_ok());
    }
}
