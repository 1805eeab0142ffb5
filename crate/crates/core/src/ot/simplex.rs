//! Exact solver for the partial transportation LP
//!
//! ```text
//! minimize   Σ c_ij f_ij
//! subject to f ≥ 0,  Σ_j f_ij ≤ w1_i,  Σ_i f_ij ≤ w2_j,  Σ f_ij = min(Σ w1, Σ w2)
//! ```
//!
//! The instance is balanced by a zero-cost slack line on the heavier side and
//! solved with the transportation simplex (MODI potentials, spanning-tree
//! bases). Dantzig pricing is used until a run of degenerate pivots is seen,
//! after which Bland's rule takes over for the rest of the solve.

use std::collections::VecDeque;

use super::{validate_instance, OtError};
use crate::tensor::Matrix;

/// Flows above this value belong to the support.
pub const SUPPORT_TOL: f64 = 1e-9;
/// Below this total mass the plan is empty.
pub const EMPTY_MASS: f64 = 1e-12;

/// Which weight vector is fully shipped (the lighter one).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MassSide {
    Rows,
    Cols,
}

/// Optimal solution with Lagrange multipliers for
/// `Σ_j f_ij ≤ w1_i` (`row_duals ≥ 0`), `Σ_i f_ij ≤ w2_j` (`col_duals ≥ 0`)
/// and the total-flow equality (`total_dual`), with the sign convention
/// `c_ij + η1_i + η2_j + ν ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    pub flows: Matrix,
    pub row_duals: Vec<f64>,
    pub col_duals: Vec<f64>,
    pub total_dual: f64,
    pub value: f64,
    pub mass: f64,
    pub side: MassSide,
}

impl TransportPlan {
    pub fn empty(n1: usize, n2: usize) -> Self {
        TransportPlan {
            flows: Matrix::zeros(n1, n2),
            row_duals: vec![0.0; n1],
            col_duals: vec![0.0; n2],
            total_dual: 0.0,
            value: 0.0,
            mass: 0.0,
            side: MassSide::Rows,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.mass < EMPTY_MASS
    }

    /// Pairs with flow above [`SUPPORT_TOL`].
    pub fn support(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.flows.rows() {
            for (j, &f) in self.flows.row(i).iter().enumerate() {
                if f > SUPPORT_TOL {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Dual objective `−η1·w1 − η2·w2 − ν·min(Σw1, Σw2)`.
    pub fn dual_value(&self, w1: &[f64], w2: &[f64]) -> f64 {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        -dot(&self.row_duals, w1) - dot(&self.col_duals, w2) - self.total_dual * self.mass
    }

    /// Most negative reduced cost `c_ij + η1_i + η2_j + ν` (zero when dual feasible).
    pub fn dual_infeasibility(&self, cost: &Matrix) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..cost.rows() {
            for j in 0..cost.cols() {
                let rc = cost.get(i, j) + self.row_duals[i] + self.col_duals[j] + self.total_dual;
                worst = worst.max(-rc);
            }
        }
        worst.max(
            self.row_duals
                .iter()
                .chain(&self.col_duals)
                .fold(0.0, |m, &d| m.max(-d)),
        )
    }

    /// Largest violation of any primal constraint.
    pub fn primal_infeasibility(&self, w1: &[f64], w2: &[f64]) -> f64 {
        let mut worst: f64 = self.flows.data().iter().fold(0.0, |m, &f| m.max(-f));
        for (s, w) in self.flows.row_sums().iter().zip(w1) {
            worst = worst.max(s - w);
        }
        for (s, w) in self.flows.col_sums().iter().zip(w2) {
            worst = worst.max(s - w);
        }
        let target = w1.iter().sum::<f64>().min(w2.iter().sum());
        let target = if target < EMPTY_MASS { 0.0 } else { target };
        worst.max((self.flows.sum() - target).abs())
    }

    /// Distance of the optimum from degeneracy: the smallest of the support
    /// flows, the off-support reduced costs, the mass imbalance and, on the
    /// heavier side, the slack or multiplier of each capacity. Zero when the
    /// optimal basis is degenerate or the optimum is not unique.
    pub fn nondegeneracy_margin(&self, cost: &Matrix, w1: &[f64], w2: &[f64]) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let support = self.support();
        let mut margin = (w1.iter().sum::<f64>() - w2.iter().sum::<f64>()).abs();
        for &(i, j) in &support {
            margin = margin.min(self.flows.get(i, j));
        }
        for i in 0..cost.rows() {
            for j in 0..cost.cols() {
                if self.flows.get(i, j) <= SUPPORT_TOL {
                    let rc = cost.get(i, j) + self.row_duals[i] + self.col_duals[j] + self.total_dual;
                    margin = margin.min(rc);
                }
            }
        }
        let (sums, caps, duals, equality_lines) = match self.side {
            MassSide::Rows => (self.flows.col_sums(), w2, &self.col_duals, w1.len()),
            MassSide::Cols => (self.flows.row_sums(), w1, &self.row_duals, w2.len()),
        };
        let mut tight = 0;
        for ((s, cap), eta) in sums.iter().zip(caps).zip(duals) {
            let slack = cap - s;
            margin = margin.min(slack.max(*eta));
            if slack <= SUPPORT_TOL {
                tight += 1;
            }
        }
        if support.len() != equality_lines + tight {
            return 0.0;
        }
        margin.max(0.0)
    }

    /// `(∂value/∂w1, ∂value/∂w2)` read off the duals. At ties of the two
    /// masses or at degenerate bases this is one element of the subdifferential.
    pub fn weight_sensitivities(&self) -> (Vec<f64>, Vec<f64>) {
        if self.is_empty() {
            return (vec![0.0; self.row_duals.len()], vec![0.0; self.col_duals.len()]);
        }
        match self.side {
            MassSide::Rows => (
                self.row_duals.iter().map(|e| -(e + self.total_dual)).collect(),
                self.col_duals.iter().map(|e| -e).collect(),
            ),
            MassSide::Cols => (
                self.row_duals.iter().map(|e| -e).collect(),
                self.col_duals.iter().map(|e| -(e + self.total_dual)).collect(),
            ),
        }
    }
}

/// Transport cost `Σ c_ij f_ij` of a plan, without normalization by the mass.
pub fn ot_value(plan: &TransportPlan, cost: &Matrix) -> Result<f64, OtError> {
    if plan.flows.shape() != cost.shape() {
        return Err(OtError::PlanMismatch(format!(
            "plan is {:?}, cost is {:?}",
            plan.flows.shape(),
            cost.shape()
        )));
    }
    Ok(plan.flows.data().iter().zip(cost.data()).map(|(f, c)| f * c).sum())
}

/// Solves the partial transportation LP exactly.
pub fn solve_transport(cost: &Matrix, w1: &[f64], w2: &[f64]) -> Result<TransportPlan, OtError> {
    validate_instance(cost, w1, w2)?;
    let (n1, n2) = cost.shape();
    let s1: f64 = w1.iter().sum();
    let s2: f64 = w2.iter().sum();
    let mass = s1.min(s2);
    if mass < EMPTY_MASS {
        return Ok(TransportPlan::empty(n1, n2));
    }

    let side = if s1 <= s2 { MassSide::Rows } else { MassSide::Cols };
    let problem = match side {
        MassSide::Rows => {
            // slack row supplying the excess column capacity
            let mut c = Vec::with_capacity((n1 + 1) * n2);
            c.extend_from_slice(cost.data());
            c.extend(std::iter::repeat_n(0.0, n2));
            let mut supply = w1.to_vec();
            supply.push((s2 - s1).max(0.0));
            Balanced::new(c, supply, w2.to_vec())
        }
        MassSide::Cols => {
            let mut c = Vec::with_capacity(n1 * (n2 + 1));
            for i in 0..n1 {
                c.extend_from_slice(cost.row(i));
                c.push(0.0);
            }
            let mut demand = w2.to_vec();
            demand.push((s1 - s2).max(0.0));
            Balanced::new(c, w1.to_vec(), demand)
        }
    };
    let sol = problem.solve()?;

    let mut flows = Matrix::zeros(n1, n2);
    for i in 0..n1 {
        for j in 0..n2 {
            flows.set(i, j, sol.flow[i * problem.n + j]);
        }
    }
    let value: f64 = flows.data().iter().zip(cost.data()).map(|(f, c)| f * c).sum();

    // Map balanced potentials (c_ij ≥ u_i + v_j) to the multipliers of the
    // original constraints, choosing ν so that every η is nonnegative.
    let (row_duals, col_duals, total_dual) = match side {
        MassSide::Rows => {
            let ud = sol.u[n1];
            let col_duals: Vec<f64> = (0..n2).map(|j| (-(sol.v[j] + ud)).max(0.0)).collect();
            let shifted: Vec<f64> = (0..n1).map(|i| ud - sol.u[i]).collect();
            let nu = shifted.iter().cloned().fold(f64::INFINITY, f64::min);
            let row_duals = shifted.iter().map(|s| s - nu).collect();
            (row_duals, col_duals, nu)
        }
        MassSide::Cols => {
            let vd = sol.v[n2];
            let row_duals: Vec<f64> = (0..n1).map(|i| (-(sol.u[i] + vd)).max(0.0)).collect();
            let shifted: Vec<f64> = (0..n2).map(|j| vd - sol.v[j]).collect();
            let nu = shifted.iter().cloned().fold(f64::INFINITY, f64::min);
            let col_duals = shifted.iter().map(|s| s - nu).collect();
            (row_duals, col_duals, nu)
        }
    };

    Ok(TransportPlan {
        flows,
        row_duals,
        col_duals,
        total_dual,
        value,
        mass,
        side,
    })
}

/// Balanced transportation problem in dense row-major form.
struct Balanced {
    m: usize,
    n: usize,
    cost: Vec<f64>,
    supply: Vec<f64>,
    demand: Vec<f64>,
}

struct BalancedSolution {
    flow: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
}

/// Consecutive zero-step pivots tolerated before switching to Bland's rule.
fn stall_limit(m: usize, n: usize) -> usize {
    2 * (m + n) + 10
}

impl Balanced {
    fn new(cost: Vec<f64>, supply: Vec<f64>, demand: Vec<f64>) -> Self {
        let (m, n) = (supply.len(), demand.len());
        debug_assert_eq!(cost.len(), m * n);
        Balanced {
            m,
            n,
            cost,
            supply,
            demand,
        }
    }

    fn solve(&self) -> Result<BalancedSolution, OtError> {
        let (m, n) = (self.m, self.n);
        let cmax = self.cost.iter().fold(0.0_f64, |a, c| a.max(c.abs()));
        let rc_tol = 1e-12 * cmax.max(1.0);

        let (mut flow, mut basis) = self.least_cost_start();
        let mut is_basic = vec![false; m * n];
        for &cell in &basis {
            is_basic[cell] = true;
        }

        let max_iter = 10_000 + 50 * m * n;
        let mut bland = false;
        let mut degenerate_run = 0usize;
        let mut u = vec![0.0; m];
        let mut v = vec![0.0; n];

        for _ in 0..max_iter {
            let adj = self.adjacency(&basis);
            self.potentials(&adj, &mut u, &mut v);

            let mut entering = None;
            let mut best = -rc_tol;
            for cell in 0..m * n {
                if is_basic[cell] {
                    continue;
                }
                let (i, j) = (cell / n, cell % n);
                let rc = self.cost[cell] - u[i] - v[j];
                if rc < best {
                    entering = Some(cell);
                    if bland {
                        break;
                    }
                    best = rc;
                }
            }
            let Some(enter) = entering else {
                let flow = self.flows_from_tree(&adj);
                return Ok(BalancedSolution { flow, u, v });
            };

            let path = self.tree_path(&adj, enter);
            // path[k] alternates −, +, −, … starting next to the entering column
            let mut theta = f64::INFINITY;
            let mut leave = usize::MAX;
            for (k, &cell) in path.iter().enumerate() {
                if k % 2 == 0 && (flow[cell] < theta || (flow[cell] == theta && cell < leave)) {
                    theta = flow[cell];
                    leave = cell;
                }
            }
            for (k, &cell) in path.iter().enumerate() {
                if k % 2 == 0 {
                    flow[cell] -= theta;
                } else {
                    flow[cell] += theta;
                }
            }
            flow[enter] = theta;
            flow[leave] = 0.0;
            is_basic[leave] = false;
            is_basic[enter] = true;
            let pos = basis.iter().position(|&c| c == leave).expect("leaving cell is basic");
            basis[pos] = enter;

            if theta == 0.0 {
                degenerate_run += 1;
                if degenerate_run > stall_limit(m, n) {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
        }
        Err(OtError::IterationLimit(max_iter))
    }

    /// Matrix-minimum start: repeatedly saturate the cheapest cell among the
    /// remaining lines, retiring exactly one line per step so the m+n−1 chosen
    /// cells form a spanning tree.
    fn least_cost_start(&self) -> (Vec<f64>, Vec<usize>) {
        let (m, n) = (self.m, self.n);
        let mut rem_s = self.supply.clone();
        let mut rem_d = self.demand.clone();
        let mut row_alive = vec![true; m];
        let mut col_alive = vec![true; n];
        let (mut rows_left, mut cols_left) = (m, n);
        let mut flow = vec![0.0; m * n];
        let mut basis = Vec::with_capacity(m + n - 1);

        while rows_left > 0 && cols_left > 0 {
            let mut pick = None;
            let mut best = f64::INFINITY;
            for i in (0..m).filter(|&i| row_alive[i]) {
                for j in (0..n).filter(|&j| col_alive[j]) {
                    let c = self.cost[i * n + j];
                    if c < best {
                        best = c;
                        pick = Some((i, j));
                    }
                }
            }
            let (i, j) = pick.expect("alive lines");
            let q = rem_s[i].min(rem_d[j]);
            flow[i * n + j] = q;
            basis.push(i * n + j);
            rem_s[i] -= q;
            rem_d[j] -= q;
            if rows_left == 1 && cols_left == 1 {
                break;
            }
            let retire_row = if rows_left == 1 {
                false
            } else if cols_left == 1 {
                true
            } else {
                rem_s[i] <= rem_d[j]
            };
            if retire_row {
                row_alive[i] = false;
                rows_left -= 1;
                rem_d[j] += rem_s[i];
                rem_s[i] = 0.0;
            } else {
                col_alive[j] = false;
                cols_left -= 1;
                rem_s[i] += rem_d[j];
                rem_d[j] = 0.0;
            }
        }
        debug_assert_eq!(basis.len(), m + n - 1);
        (flow, basis)
    }

    /// Tree adjacency over nodes `0..m` (rows) and `m..m+n` (columns); each
    /// entry is `(neighbour node, cell)`.
    fn adjacency(&self, basis: &[usize]) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for &cell in basis {
            let (i, j) = (cell / self.n, cell % self.n);
            adj[i].push((self.m + j, cell));
            adj[self.m + j].push((i, cell));
        }
        adj
    }

    fn potentials(&self, adj: &[Vec<(usize, usize)>], u: &mut [f64], v: &mut [f64]) {
        let m = self.m;
        let mut seen = vec![false; m + self.n];
        let mut queue = VecDeque::new();
        u[0] = 0.0;
        seen[0] = true;
        queue.push_back(0);
        while let Some(node) = queue.pop_front() {
            for &(next, cell) in &adj[node] {
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                if node < m {
                    v[next - m] = self.cost[cell] - u[node];
                } else {
                    u[next] = self.cost[cell] - v[node - m];
                }
                queue.push_back(next);
            }
        }
    }

    /// Basic cells on the tree path from the entering cell's column to its row.
    fn tree_path(&self, adj: &[Vec<(usize, usize)>], enter: usize) -> Vec<usize> {
        let (i, j) = (enter / self.n, enter % self.n);
        let start = self.m + j;
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; self.m + self.n];
        let mut seen = vec![false; self.m + self.n];
        let mut queue = VecDeque::new();
        seen[start] = true;
        queue.push_back(start);
        while let Some(node) = queue.pop_front() {
            if node == i {
                break;
            }
            for &(next, cell) in &adj[node] {
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some((node, cell));
                    queue.push_back(next);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = i;
        while let Some((prev, cell)) = parent[node] {
            path.push(cell);
            node = prev;
        }
        path.reverse();
        path
    }

    /// Recomputes basic flows from the tree by peeling leaves, which removes
    /// the drift accumulated over many pivots.
    fn flows_from_tree(&self, adj: &[Vec<(usize, usize)>]) -> Vec<f64> {
        let (m, n) = (self.m, self.n);
        let mut residual: Vec<f64> = self.supply.iter().chain(&self.demand).cloned().collect();
        let mut degree: Vec<usize> = adj.iter().map(|a| a.len()).collect();
        let mut used = vec![false; m * n];
        let mut flow = vec![0.0; m * n];
        let mut queue: VecDeque<usize> = (0..m + n).filter(|&k| degree[k] == 1).collect();
        while let Some(node) = queue.pop_front() {
            if degree[node] != 1 {
                continue;
            }
            let Some(&(other, cell)) = adj[node].iter().find(|(_, c)| !used[*c]) else {
                continue;
            };
            let q = residual[node].max(0.0);
            flow[cell] = q;
            used[cell] = true;
            residual[node] = 0.0;
            residual[other] -= q;
            degree[node] = 0;
            degree[other] -= 1;
            if degree[other] == 1 {
                queue.push_back(other);
            }
        }
        flow
    }
}
