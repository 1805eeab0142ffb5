use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::brute::{brute_force_transport, BRUTE_FORCE_MAX_DIM, BRUTE_FORCE_MAX_MASS};
use super::gradients::{transport_gradients, GradMode};
use super::simplex::{solve_transport, TransportPlan};
use super::OtError;
use crate::tensor::Matrix;

/// Largest integral weight drawn by [`random_integral_instance`].
const MAX_INTEGRAL_WEIGHT: u32 = 6;

/// A small instance with integral weights whose lighter side carries at most
/// the enumeration bound, and costs uniform in `[0, 2)`.
pub fn random_integral_instance<R: Rng + ?Sized>(rng: &mut R) -> (Matrix, Vec<f64>, Vec<f64>) {
    let n1 = rng.random_range(1..=BRUTE_FORCE_MAX_DIM);
    let n2 = rng.random_range(1..=BRUTE_FORCE_MAX_DIM);
    let cost = uniform_cost(rng, n1, n2);
    let mut a: Vec<u32> = (0..n1).map(|_| rng.random_range(0..=MAX_INTEGRAL_WEIGHT)).collect();
    let mut b: Vec<u32> = (0..n2).map(|_| rng.random_range(0..=MAX_INTEGRAL_WEIGHT)).collect();
    while a.iter().sum::<u32>().min(b.iter().sum()) > BRUTE_FORCE_MAX_MASS {
        let lighter = if a.iter().sum::<u32>() <= b.iter().sum() {
            &mut a
        } else {
            &mut b
        };
        let k = rng.random_range(0..lighter.len());
        lighter[k] = lighter[k].saturating_sub(1);
    }
    let to_f = |v: Vec<u32>| v.into_iter().map(f64::from).collect();
    (cost, to_f(a), to_f(b))
}

/// Up to `max_n` rows and columns with real weights in `[0, 3)`.
pub fn random_real_instance<R: Rng + ?Sized>(rng: &mut R, max_n: usize) -> (Matrix, Vec<f64>, Vec<f64>) {
    let n1 = rng.random_range(1..=max_n);
    let n2 = rng.random_range(1..=max_n);
    let cost = uniform_cost(rng, n1, n2);
    let a = (0..n1).map(|_| rng.random_range(0.0..3.0)).collect();
    let b = (0..n2).map(|_| rng.random_range(0.0..3.0)).collect();
    (cost, a, b)
}

/// Draws instances until one has a unique, strictly complementary optimum
/// with the given margin.
pub fn random_nondegenerate_instance<R: Rng + ?Sized>(
    rng: &mut R,
    margin: f64,
) -> (Matrix, Vec<f64>, Vec<f64>, TransportPlan) {
    loop {
        let n1 = rng.random_range(2..=6);
        let n2 = rng.random_range(2..=6);
        let cost = uniform_cost(rng, n1, n2);
        let a: Vec<f64> = (0..n1).map(|_| rng.random_range(0.5..2.0)).collect();
        let b: Vec<f64> = (0..n2).map(|_| rng.random_range(0.5..2.0)).collect();
        let plan = solve_transport(&cost, &a, &b).expect("valid instance");
        if plan.nondegeneracy_margin(&cost, &a, &b) > margin {
            return (cost, a, b, plan);
        }
    }
}

fn uniform_cost<R: Rng + ?Sized>(rng: &mut R, n1: usize, n2: usize) -> Matrix {
    let data = (0..n1 * n2).map(|_| rng.random_range(0.0..2.0)).collect();
    Matrix::from_vec(n1, n2, data).expect("sized buffer")
}

/// Simplex against exhaustive enumeration.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub trials: usize,
    pub max_abs_error: f64,
    /// Trials whose values differ by more than `1e-9`.
    pub failures: usize,
}

pub fn oracle_trials(trials: usize, seed: u64) -> Result<OracleReport, OtError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport {
        trials,
        max_abs_error: 0.0,
        failures: 0,
    };
    for _ in 0..trials {
        let (c, a, b) = random_integral_instance(&mut rng);
        let lp = solve_transport(&c, &a, &b)?.value;
        let err = (lp - brute_force_transport(&c, &a, &b)?).abs();
        report.max_abs_error = report.max_abs_error.max(err);
        if err > 1e-9 {
            report.failures += 1;
        }
    }
    Ok(report)
}

/// Worst duality gap and constraint violations over random real instances.
#[derive(Clone, Debug, PartialEq)]
pub struct DualityReport {
    pub trials: usize,
    pub max_gap: f64,
    pub max_primal_infeasibility: f64,
    pub max_dual_infeasibility: f64,
}

pub fn duality_trials(trials: usize, max_n: usize, seed: u64) -> Result<DualityReport, OtError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = DualityReport {
        trials,
        max_gap: 0.0,
        max_primal_infeasibility: 0.0,
        max_dual_infeasibility: 0.0,
    };
    for _ in 0..trials {
        let (c, a, b) = random_real_instance(&mut rng, max_n);
        let plan = solve_transport(&c, &a, &b)?;
        report.max_gap = report.max_gap.max((plan.dual_value(&a, &b) - plan.value).abs());
        report.max_primal_infeasibility = report.max_primal_infeasibility.max(plan.primal_infeasibility(&a, &b));
        report.max_dual_infeasibility = report.max_dual_infeasibility.max(plan.dual_infeasibility(&c));
    }
    Ok(report)
}

/// Worst `|analytic − fd| / max(1, |fd|)` of [`transport_gradients`] against
/// central differences of the exact value, over random non-degenerate
/// instances.
pub fn transport_gradient_audit(mode: GradMode, instances: usize, h: f64, seed: u64) -> Result<f64, OtError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let value = |c: &Matrix, a: &[f64], b: &[f64]| solve_transport(c, a, b).map(|p| p.value);
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(1.0);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let (c, a, b, plan) = random_nondegenerate_instance(&mut rng, 0.02);
        let g = transport_gradients(&plan, &c, &a, &b, mode)?;
        for k in 0..c.len() {
            let (mut up, mut down) = (c.clone(), c.clone());
            up.data_mut()[k] += h;
            down.data_mut()[k] -= h;
            let fd = (value(&up, &a, &b)? - value(&down, &a, &b)?) / (2.0 * h);
            worst = worst.max(rel(g.cost.data()[k], fd));
        }
        for i in 0..a.len() {
            let (mut up, mut down) = (a.clone(), a.clone());
            up[i] += h;
            down[i] -= h;
            let fd = (value(&c, &up, &b)? - value(&c, &down, &b)?) / (2.0 * h);
            worst = worst.max(rel(g.w1[i], fd));
        }
        for j in 0..b.len() {
            let (mut up, mut down) = (b.clone(), b.clone());
            up[j] += h;
            down[j] -= h;
            let fd = (value(&c, &a, &up)? - value(&c, &a, &down)?) / (2.0 * h);
            worst = worst.max(rel(g.w2[j], fd));
        }
    }
    Ok(worst)
}
