//! Strictly convex variant of the transport LP,
//!
//! ```text
//! minimize   Σ c_ij f_ij + (ε/2) Σ f_ij²
//! ```
//!
//! over the same feasible set, and the Jacobian-vector products of its
//! transport value `Σ c_ij f_ij` obtained from the KKT system on the active set.
//!
//! Internally the lighter side is oriented as rows, whose capacities are then
//! equalities, and the dual
//!
//! ```text
//! h(u, β) = Σ [u_i − β_j − c_ij]_+² / (2ε) − u·a + β·b,   β ≥ 0
//! ```
//!
//! is minimized by a projected semismooth Newton method. A final exact solve
//! on the detected active set removes the iteration error.

use super::simplex::{MassSide, TransportPlan, EMPTY_MASS};
use super::{validate_instance, OtError};
use crate::linalg::solve_psd;
use crate::tensor::Matrix;

const MAX_NEWTON: usize = 500;
const ARMIJO: f64 = 1e-4;

/// Optimum of the damped problem.
#[derive(Clone, Debug)]
pub struct DampedPlan {
    pub flows: Matrix,
    /// `Σ c_ij f_ij`
    pub value: f64,
    /// `value + (ε/2)‖f‖²`
    pub objective: f64,
    pub epsilon: f64,
    pub mass: f64,
    pub side: MassSide,
    oriented: Option<Oriented>,
}

#[derive(Clone, Debug)]
struct Oriented {
    c: Matrix,
    a: Vec<f64>,
    b: Vec<f64>,
    u: Vec<f64>,
    beta: Vec<f64>,
    flows: Matrix,
}

impl DampedPlan {
    /// Gradients of [`DampedPlan::value`] with respect to the cost matrix and
    /// both weight vectors, from the linearized KKT conditions at the optimum.
    pub fn value_gradients(&self) -> (Matrix, Vec<f64>, Vec<f64>) {
        let (n1, n2) = self.flows.shape();
        let Some(o) = &self.oriented else {
            return (Matrix::zeros(n1, n2), vec![0.0; n1], vec![0.0; n2]);
        };
        let (gc, ga, gb) = o.value_vjp(self.epsilon);
        match self.side {
            MassSide::Rows => (gc, ga, gb),
            MassSide::Cols => (gc.transpose(), gb, ga),
        }
    }
}

/// Solves the damped problem from a cold start.
pub fn solve_damped_transport(cost: &Matrix, w1: &[f64], w2: &[f64], epsilon: f64) -> Result<DampedPlan, OtError> {
    solve_damped(cost, w1, w2, epsilon, None)
}

/// Solves the damped problem, starting Newton from the duals of an LP plan.
pub(crate) fn solve_damped(
    cost: &Matrix,
    w1: &[f64],
    w2: &[f64],
    epsilon: f64,
    warm: Option<&TransportPlan>,
) -> Result<DampedPlan, OtError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(OtError::InvalidDamping(epsilon));
    }
    validate_instance(cost, w1, w2)?;
    let (n1, n2) = cost.shape();
    let s1: f64 = w1.iter().sum();
    let s2: f64 = w2.iter().sum();
    let mass = s1.min(s2);
    let side = if s1 <= s2 { MassSide::Rows } else { MassSide::Cols };
    if mass < EMPTY_MASS {
        return Ok(DampedPlan {
            flows: Matrix::zeros(n1, n2),
            value: 0.0,
            objective: 0.0,
            epsilon,
            mass: 0.0,
            side,
            oriented: None,
        });
    }

    let (c, a, b) = match side {
        MassSide::Rows => (cost.clone(), w1.to_vec(), w2.to_vec()),
        MassSide::Cols => (cost.transpose(), w2.to_vec(), w1.to_vec()),
    };
    let start = warm.filter(|p| !p.is_empty() && p.side == side).map(|p| {
        let (g1, g2) = p.weight_sensitivities();
        match side {
            MassSide::Rows => (g1, g2.iter().map(|g| -g).collect::<Vec<_>>()),
            MassSide::Cols => (g2, g1.iter().map(|g| -g).collect()),
        }
    });

    let oriented = Oriented::solve(c, a, b, epsilon, start)?;
    let flows = match side {
        MassSide::Rows => oriented.flows.clone(),
        MassSide::Cols => oriented.flows.transpose(),
    };
    let value: f64 = flows.data().iter().zip(cost.data()).map(|(f, c)| f * c).sum();
    let sq: f64 = flows.data().iter().map(|f| f * f).sum();
    Ok(DampedPlan {
        flows,
        value,
        objective: value + 0.5 * epsilon * sq,
        epsilon,
        mass,
        side,
        oriented: Some(oriented),
    })
}

/// Variables held at the bound `β = 0` and the largest free gradient entry.
fn projected(g: &[f64], beta: &[f64], cols: &[usize], nr: usize) -> (Vec<bool>, f64) {
    let binding: Vec<bool> = (0..g.len())
        .map(|k| k >= nr && beta[cols[k - nr]] <= 0.0 && g[k] > 0.0)
        .collect();
    let pg = (0..g.len())
        .filter(|&k| !binding[k])
        .map(|k| g[k].abs())
        .fold(0.0, f64::max);
    (binding, pg)
}

impl Oriented {
    fn solve(
        c: Matrix,
        a: Vec<f64>,
        b: Vec<f64>,
        eps: f64,
        start: Option<(Vec<f64>, Vec<f64>)>,
    ) -> Result<Self, OtError> {
        let (m, n) = c.shape();
        let scale = a.iter().sum::<f64>().max(1.0);
        let cscale = c.max_abs().max(1.0);
        let rows: Vec<usize> = (0..m).filter(|&i| a[i] > 0.0).collect();
        let cols: Vec<usize> = (0..n).filter(|&j| b[j] > 0.0).collect();

        let (mut u, mut beta) = match start {
            Some((u, beta)) => (u, beta.into_iter().map(|x| x.max(0.0)).collect()),
            None => {
                let u = (0..m)
                    .map(|i| {
                        let cmax = cols.iter().map(|&j| c.get(i, j)).fold(f64::NEG_INFINITY, f64::max);
                        cmax + eps * a[i] / cols.len().max(1) as f64
                    })
                    .collect();
                (u, vec![0.0; n])
            }
        };

        let mut this = Oriented {
            c,
            a,
            b,
            u: vec![0.0; m],
            beta: vec![0.0; n],
            flows: Matrix::zeros(m, n),
        };

        let nr = rows.len();
        let nvar = nr + cols.len();
        let mut converged = false;
        for _ in 0..MAX_NEWTON {
            let (h, g) = this.dual(&rows, &cols, &u, &beta, eps);
            // rounding in u − β − c is amplified by 1/ε in the gradient
            let umax = u.iter().chain(&beta).fold(0.0_f64, |m, x| m.max(x.abs()));
            let grad_tol = (1e-13 * scale).max(1e-15 * (cscale + umax) * nvar as f64 / eps);
            let (binding, pg) = projected(&g, &beta, &cols, nr);
            if pg <= grad_tol {
                converged = true;
                break;
            }

            let free: Vec<usize> = (0..nvar).filter(|&k| !binding[k]).collect();
            let mut hess = this.hessian(&rows, &cols, &u, &beta, eps, &free, 1e-12 * cscale);
            // proximal term: the objective is only piecewise quadratic and can
            // fall linearly along null directions of the generalized Hessian
            let mu = pg / cscale;
            for p in 0..free.len() {
                hess.set(p, p, hess.get(p, p) + mu);
            }
            let rhs: Vec<f64> = free.iter().map(|&k| -g[k]).collect();
            let priority = vec![0u8; free.len()];
            // dependent directions are frozen, which keeps the step a descent direction
            let step = solve_psd(&hess, &rhs, &priority, 1e-10).x;

            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..80 {
                let mut un = u.clone();
                let mut bn = beta.clone();
                for (s, &k) in step.iter().zip(&free) {
                    if k < nr {
                        un[rows[k]] += t * s;
                    } else {
                        let j = cols[k - nr];
                        bn[j] = (bn[j] + t * s).max(0.0);
                    }
                }
                let mut decrease = 0.0;
                for (k, gk) in g.iter().enumerate() {
                    decrease += gk
                        * if k < nr {
                            un[rows[k]] - u[rows[k]]
                        } else {
                            bn[cols[k - nr]] - beta[cols[k - nr]]
                        };
                }
                let (hn, gn) = this.dual(&rows, &cols, &un, &bn, eps);
                // near the optimum the decrease of h drops below its rounding
                // error, so a halved projected gradient also counts as progress
                let armijo = hn <= h + ARMIJO * decrease.min(0.0) && hn < h;
                if armijo || projected(&gn, &bn, &cols, nr).1 < 0.5 * pg {
                    accepted = true;
                    u = un;
                    beta = bn;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                // no further decrease representable; accept if near stationary
                converged = pg <= 1e-8 * scale;
                break;
            }
        }
        if !converged {
            return Err(OtError::DampedNoConvergence(format!(
                "projected Newton stalled on a {m}x{n} instance"
            )));
        }

        this.u = u;
        this.beta = beta;
        this.assign_flows(eps);
        this.polish(eps);
        this.fill_excluded(&rows, &cols);
        Ok(this)
    }

    /// Dual objective and gradient over the included rows and columns.
    fn dual(&self, rows: &[usize], cols: &[usize], u: &[f64], beta: &[f64], eps: f64) -> (f64, Vec<f64>) {
        let nr = rows.len();
        let mut g = vec![0.0; nr + cols.len()];
        let mut h = 0.0;
        for (ri, &i) in rows.iter().enumerate() {
            h -= u[i] * self.a[i];
            g[ri] -= self.a[i];
            for (ci, &j) in cols.iter().enumerate() {
                let s = u[i] - beta[j] - self.c.get(i, j);
                if s > 0.0 {
                    h += s * s / (2.0 * eps);
                    g[ri] += s / eps;
                    g[nr + ci] -= s / eps;
                }
            }
        }
        for (ci, &j) in cols.iter().enumerate() {
            h += beta[j] * self.b[j];
            g[nr + ci] += self.b[j];
        }
        (h, g)
    }

    #[allow(clippy::too_many_arguments)]
    fn hessian(
        &self,
        rows: &[usize],
        cols: &[usize],
        u: &[f64],
        beta: &[f64],
        eps: f64,
        free: &[usize],
        kink: f64,
    ) -> Matrix {
        let nr = rows.len();
        let nvar = nr + cols.len();
        let mut full = Matrix::zeros(nvar, nvar);
        for (ri, &i) in rows.iter().enumerate() {
            for (ci, &j) in cols.iter().enumerate() {
                if u[i] - beta[j] - self.c.get(i, j) > -kink {
                    let (r, k) = (ri, nr + ci);
                    full.set(r, r, full.get(r, r) + 1.0 / eps);
                    full.set(k, k, full.get(k, k) + 1.0 / eps);
                    full.set(r, k, full.get(r, k) - 1.0 / eps);
                    full.set(k, r, full.get(k, r) - 1.0 / eps);
                }
            }
        }
        let mut hess = Matrix::zeros(free.len(), free.len());
        for (p, &kp) in free.iter().enumerate() {
            for (q, &kq) in free.iter().enumerate() {
                hess.set(p, q, full.get(kp, kq));
            }
        }
        hess
    }

    fn assign_flows(&mut self, eps: f64) {
        let (m, n) = self.c.shape();
        for i in 0..m {
            for j in 0..n {
                let f = if self.a[i] > 0.0 && self.b[j] > 0.0 {
                    ((self.u[i] - self.beta[j] - self.c.get(i, j)) / eps).max(0.0)
                } else {
                    0.0
                };
                self.flows.set(i, j, f);
            }
        }
    }

    fn active(&self) -> (Vec<(usize, usize)>, Vec<usize>) {
        let (m, n) = self.c.shape();
        let tol = 1e-14 * self.a.iter().sum::<f64>().max(1.0);
        let pattern = (0..m)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.flows.get(i, j) > tol)
            .collect();
        let tight = (0..n).filter(|&j| self.beta[j] > 0.0).collect();
        (pattern, tight)
    }

    /// `D Dᵀ` and the map from cells to constraint indices for the active set.
    fn kkt_system(&self, pattern: &[(usize, usize)], tight: &[usize]) -> (Matrix, Vec<(usize, Option<usize>)>) {
        let m = self.c.rows();
        let mut col_slot = vec![None; self.c.cols()];
        for (k, &j) in tight.iter().enumerate() {
            col_slot[j] = Some(m + k);
        }
        let dim = m + tight.len();
        let mut mm = Matrix::zeros(dim, dim);
        let mut cells = Vec::with_capacity(pattern.len());
        for &(i, j) in pattern {
            mm.set(i, i, mm.get(i, i) + 1.0);
            if let Some(k) = col_slot[j] {
                mm.set(k, k, mm.get(k, k) + 1.0);
                mm.set(i, k, mm.get(i, k) + 1.0);
                mm.set(k, i, mm.get(k, i) + 1.0);
            }
            cells.push((i, col_slot[j]));
        }
        (mm, cells)
    }

    fn priorities(&self, tight: &[usize]) -> Vec<u8> {
        let mut p = vec![0u8; self.c.rows()];
        p.extend(std::iter::repeat_n(1u8, tight.len()));
        p
    }

    /// Re-solves the optimality conditions exactly on the current active set
    /// and keeps the result when it satisfies every KKT condition.
    fn polish(&mut self, eps: f64) {
        let (pattern, tight) = self.active();
        if pattern.is_empty() {
            return;
        }
        let (m, n) = self.c.shape();
        let (mm, cells) = self.kkt_system(&pattern, &tight);
        let mut rhs = vec![0.0; mm.rows()];
        for i in 0..m {
            rhs[i] = eps * self.a[i];
        }
        for (k, &j) in tight.iter().enumerate() {
            rhs[m + k] = eps * self.b[j];
        }
        for (&(i, j), &(_, slot)) in pattern.iter().zip(&cells) {
            let c = self.c.get(i, j);
            rhs[i] += c;
            if let Some(k) = slot {
                rhs[k] += c;
            }
        }
        let sol = solve_psd(&mm, &rhs, &self.priorities(&tight), 1e-12);
        let scale = self.a.iter().sum::<f64>().max(1.0);
        if sol.dropped_residual > 1e-9 * scale * (1.0 + self.c.max_abs()) {
            return;
        }
        let y = sol.x;
        let mut u = self.u.clone();
        u[..m].copy_from_slice(&y[..m]);
        let mut beta = vec![0.0; n];
        for (k, &j) in tight.iter().enumerate() {
            beta[j] = -y[m + k];
        }

        let tol = 1e-10 * scale;
        let mut flows = Matrix::zeros(m, n);
        for &(i, j) in &pattern {
            let f = (u[i] - beta[j] - self.c.get(i, j)) / eps;
            if f < -tol {
                return;
            }
            flows.set(i, j, f.max(0.0));
        }
        if beta.iter().any(|&x| x < -tol * eps) {
            return;
        }
        for i in 0..m {
            for j in 0..n {
                if self.a[i] > 0.0
                    && self.b[j] > 0.0
                    && flows.get(i, j) == 0.0
                    && u[i] - beta[j] - self.c.get(i, j) > tol * eps
                {
                    return;
                }
            }
        }
        let colsum = flows.col_sums();
        if (0..n).any(|j| colsum[j] > self.b[j] + tol) {
            return;
        }
        self.u = u;
        self.beta = beta.into_iter().map(|x| x.max(0.0)).collect();
        self.flows = flows;
    }

    /// Marginal prices for rows and columns that carry no weight and were
    /// left out of the solve.
    fn fill_excluded(&mut self, rows: &[usize], cols: &[usize]) {
        let (m, n) = self.c.shape();
        for i in 0..m {
            if rows.contains(&i) {
                continue;
            }
            self.u[i] = cols
                .iter()
                .map(|&j| self.c.get(i, j) + self.beta[j])
                .fold(f64::INFINITY, f64::min);
            if !self.u[i].is_finite() {
                self.u[i] = 0.0;
            }
        }
        for j in 0..n {
            if cols.contains(&j) {
                continue;
            }
            self.beta[j] = rows.iter().map(|&i| self.u[i] - self.c.get(i, j)).fold(0.0, f64::max);
        }
    }

    fn value_vjp(&self, eps: f64) -> (Matrix, Vec<f64>, Vec<f64>) {
        let (m, n) = self.c.shape();
        let (pattern, tight) = self.active();
        let mut gc = Matrix::zeros(m, n);
        let mut ga = vec![0.0; m];
        let mut gb = vec![0.0; n];
        for i in 0..m {
            if self.a[i] == 0.0 {
                ga[i] = self.u[i];
            }
        }
        for j in 0..n {
            if self.b[j] == 0.0 {
                gb[j] = -self.beta[j];
            }
        }
        if pattern.is_empty() {
            return (gc, ga, gb);
        }
        let (mm, cells) = self.kkt_system(&pattern, &tight);
        let mut dc = vec![0.0; mm.rows()];
        for (&(i, j), &(_, slot)) in pattern.iter().zip(&cells) {
            let c = self.c.get(i, j);
            dc[i] += c;
            if let Some(k) = slot {
                dc[k] += c;
            }
        }
        let z = solve_psd(&mm, &dc, &self.priorities(&tight), 1e-12).x;
        for (&(i, j), &(_, slot)) in pattern.iter().zip(&cells) {
            let proj = z[i] + slot.map_or(0.0, |k| z[k]);
            gc.set(i, j, self.flows.get(i, j) - (self.c.get(i, j) - proj) / eps);
        }
        for i in 0..m {
            if self.a[i] > 0.0 {
                ga[i] = z[i];
            }
        }
        for (k, &j) in tight.iter().enumerate() {
            gb[j] = z[m + k];
        }
        (gc, ga, gb)
    }
}
