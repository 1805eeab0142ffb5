//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Criteria that need the public benchmark files read them from
//! `AMOSL_DATA_DIR` (default `<workspace>/data`). When the files are absent
//! those lines report FAIL with the reason `blocked` and do not change the
//! exit status; every other FAIL does. The ten-fold MUTAG run also needs
//! `AMOSL_FULL_PROFILE=1`.

mod common;

use std::env;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use amosl::gnn::Fusion;
use amosl::graph_io::{self, FeaturePolicy};
use amosl::ot::{contribution_scores, duality_trials, oracle_trials, transport_gradient_audit, GradMode};
use amosl::tensor::{primitive_audits, Matrix};
use amosl::train::{
    cross_validate, network_gradient_audit, update_reg, RegMode, RegState, Report, RunOptions, TrainConfig,
    NETWORK_STEP, NETWORK_TOLERANCE, PRIMITIVE_TOLERANCE, TRANSPORT_STEP, TRANSPORT_TOLERANCE,
};

const ORACLE_TOLERANCE: f64 = 1e-9;
const DUALITY_TOLERANCE: f64 = 1e-9;
const REG_TOLERANCE: f64 = 1e-15;
const DAMPING: f64 = 1e-3;

enum Outcome {
    Pass(String),
    Fail(String),
    Blocked(String),
}

struct Suite {
    failures: usize,
}

impl Suite {
    fn report(&mut self, id: &str, title: &str, outcome: Outcome) {
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                self.failures += 1;
                ("FAIL", d)
            }
            Outcome::Blocked(d) => ("FAIL", format!("blocked: {d}")),
        };
        println!("{tag} [{id}] {title}: {detail}");
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn oracle() -> Outcome {
    let start = Instant::now();
    let r = match oracle_trials(500, 1) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let secs = start.elapsed().as_secs_f64();
    check(
        r.trials == 500 && r.failures == 0 && r.max_abs_error <= ORACLE_TOLERANCE && secs < 10.0,
        format!(
            "{} instances, max |simplex - enumeration| {:.2e} (tol {ORACLE_TOLERANCE:.0e}), {} mismatches, {secs:.2} s (limit 10 s)",
            r.trials, r.max_abs_error, r.failures
        ),
    )
}

fn duality() -> Outcome {
    let start = Instant::now();
    let r = match duality_trials(1000, 20, 2) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let secs = start.elapsed().as_secs_f64();
    let worst = r.max_primal_infeasibility.max(r.max_dual_infeasibility);
    check(
        r.trials == 1000 && r.max_gap <= DUALITY_TOLERANCE && worst <= DUALITY_TOLERANCE && secs < 30.0,
        format!(
            "{} instances, max |primal - dual| {:.2e}, max primal violation {:.2e}, max dual violation {:.2e} (tol {DUALITY_TOLERANCE:.0e}), {secs:.2} s (limit 30 s)",
            r.trials, r.max_gap, r.max_primal_infeasibility, r.max_dual_infeasibility
        ),
    )
}

fn gradients(suite: &mut Suite) {
    let start = Instant::now();
    let audits = primitive_audits(3);
    let (worst, name) = audits
        .iter()
        .map(|a| (a.max_relative_error, a.name.to_string()))
        .fold((0.0, String::new()), |acc, x| if x.0 > acc.0 { x } else { acc });
    suite.report(
        "3a",
        "tape primitives vs central differences",
        check(
            worst < PRIMITIVE_TOLERANCE,
            format!(
                "{} primitives, max rel err {worst:.2e} ({name}), tol {PRIMITIVE_TOLERANCE:.0e}",
                audits.len()
            ),
        ),
    );

    let kkt = GradMode::kkt_qp(DAMPING).expect("positive damping");
    let mut parts = Vec::new();
    let mut ok = true;
    for mode in [GradMode::Envelope, kkt] {
        match transport_gradient_audit(mode, 100, TRANSPORT_STEP, 4) {
            Ok(e) => {
                ok &= e < TRANSPORT_TOLERANCE;
                parts.push(format!("{mode} {e:.2e}"));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{mode} error {e}"));
            }
        }
    }
    suite.report(
        "3b",
        "transport gradients vs central differences",
        check(
            ok,
            format!(
                "100 non-degenerate instances, h {TRANSPORT_STEP:.0e}, max rel err {}, tol {TRANSPORT_TOLERANCE:.0e}",
                parts.join(", ")
            ),
        ),
    );

    let outcome = match network_gradient_audit(kkt, 5, NETWORK_STEP) {
        Ok(a) => check(
            a.max_relative_error < NETWORK_TOLERANCE,
            format!(
                "2 graphs of 5 nodes, 3 features, widths 4/6/8, {kkt}, h {NETWORK_STEP:.0e}, max rel err {:.2e}, tol {NETWORK_TOLERANCE:.0e}, suite {:.1} s (limit 120 s)",
                a.max_relative_error,
                start.elapsed().as_secs_f64()
            ),
        ),
        Err(e) => Outcome::Fail(e.to_string()),
    };
    suite.report("3c", "network loss gradient vs central differences", outcome);
}

fn reg_properties(suite: &mut Suite) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut steps, mut lo, mut hi) = (0usize, f64::INFINITY, f64::NEG_INFINITY);
    let mut ok = true;
    for _ in 0..10_000 {
        let gamma = rng.random_range(0.0..1.0);
        let mut s = RegState::new(gamma).expect("gamma in range");
        for _ in 0..rng.random_range(1..=50) {
            let p: f64 = rng.random_range(0.0..=1.0);
            s = update_reg(&s, p).expect("p in range");
            ok &= (0.0..=1.0).contains(&s.reg);
            lo = lo.min(s.reg);
            hi = hi.max(s.reg);
            steps += 1;
        }
    }
    suite.report(
        "4a",
        "adaptive weight stays in [0, 1]",
        check(
            ok,
            format!("10000 sequences, {steps} updates, observed range [{lo:.3e}, {hi:.6}]"),
        ),
    );

    let first = update_reg(&RegState::new(0.9).expect("gamma"), 0.8)
        .expect("update")
        .reg;
    let worked = update_reg(
        &RegState {
            reg: 0.2,
            gamma: 0.9,
            t: 1,
        },
        0.5,
    )
    .expect("update")
    .reg;
    suite.report(
        "4b",
        "hand-checked adaptive weight values",
        check(
            (first - 0.2).abs() <= REG_TOLERANCE && (worked - 0.23).abs() <= REG_TOLERANCE,
            format!("first update {first:?} (want 0.2), momentum step {worked:?} (want 0.23), tol {REG_TOLERANCE:.0e}"),
        ),
    );
}

fn normal_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix {
    Matrix::from_vec(n, d, (0..n * d).map(|_| rng.sample(StandardNormal)).collect()).expect("shape")
}

fn conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut pairs, mut bad) = (0, 0);
    while pairs < 1000 {
        let n = rng.random_range(1..=12);
        let d = rng.random_range(1..=16);
        let z1 = normal_matrix(&mut rng, n, d);
        let z2 = normal_matrix(&mut rng, n, d);
        if z1.data().iter().zip(z2.data()).any(|(a, b)| a == b) {
            continue;
        }
        pairs += 1;
        let max = contribution_scores(&z1, &z2, Fusion::Max).expect("same shape");
        for r in 0..n {
            let wins = z1.row(r).iter().zip(z2.row(r)).filter(|(a, b)| a > b).count() as f64;
            if max.cs1[r] + max.cs2[r] != d as f64 || max.cs1[r] != wins {
                bad += 1;
            }
        }
        for fusion in [Fusion::Concat, Fusion::Hadamard] {
            let cs = contribution_scores(&z1, &z2, fusion).expect("same shape");
            if cs.normalized1.iter().chain(&cs.normalized2).any(|&v| v != 0.5) {
                bad += 1;
            }
        }
    }
    check(
        bad == 0,
        format!("{pairs} tie-free pairs, max fusion CS1 + CS2 = d on every node, concat/hadamard shares all 0.5, {bad} violations"),
    )
}

fn data_dir() -> PathBuf {
    env::var_os("AMOSL_DATA_DIR").map(PathBuf::from).unwrap_or_else(|| {
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .ancestors()
            .nth(2)
            .expect("workspace root")
            .join("data")
    })
}

const TABLE: [(&str, usize, usize, usize, f64); 6] = [
    ("MUTAG", 188, 2, 7, 17.93),
    ("BZR_MD", 306, 2, 8, 21.30),
    ("PTC_MR", 344, 2, 18, 14.29),
    ("ER_MD", 446, 2, 10, 21.33),
    ("Cuneiform", 267, 30, 3, 21.27),
    ("KKI", 83, 2, 190, 26.96),
];

fn dataset_fidelity(suite: &mut Suite) {
    let root = data_dir();
    for (name, graphs, classes, features, avg) in TABLE {
        let title = format!("{name} statistics");
        let Some(dir) = graph_io::locate_dataset(&root, name) else {
            suite.report(
                "6",
                &title,
                Outcome::Blocked(format!("{name} files not found under {}", root.display())),
            );
            continue;
        };
        let outcome = graph_io::parse_tudataset(&dir, name)
            .and_then(|raw| graph_io::prepare(&raw, FeaturePolicy::Auto, 0))
            .map(|ds| {
                let got = (ds.graphs.len(), ds.num_classes, ds.feature_dim);
                check(
                    got == (graphs, classes, features),
                    format!(
                        "graphs/classes/features {got:?}, expected {:?}; average nodes {:.2} (table {avg:.2})",
                        (graphs, classes, features),
                        ds.avg_nodes()
                    ),
                )
            });
        suite.report("6", &title, outcome.unwrap_or_else(|e| Outcome::Fail(e.to_string())));
    }
}

fn mutag_config(epochs: usize, folds: usize) -> TrainConfig {
    TrainConfig {
        dataset: "MUTAG".into(),
        data: data_dir(),
        epochs,
        folds,
        ..TrainConfig::default()
    }
}

fn run(cfg: &TrainConfig) -> Result<Report, String> {
    let ds = amosl::train::load_dataset(cfg).map_err(|e| e.to_string())?;
    cross_validate(&ds, cfg, RunOptions::default(), &mut |_| Ok(()))
        .map(|(r, _)| r)
        .map_err(|e| e.to_string())
}

fn end_to_end(suite: &mut Suite) {
    let root = data_dir();
    if graph_io::locate_dataset(&root, "MUTAG").is_none() {
        let why = format!("MUTAG files not found under {}", root.display());
        suite.report("7", "MUTAG 10-fold accuracy >= 0.85", Outcome::Blocked(why.clone()));
        suite.report(
            "7r",
            "MUTAG reduced profile accuracy >= 0.80",
            Outcome::Blocked(why.clone()),
        );
        suite.report(
            "8a",
            "adaptive weight keeps a larger final distance than weight 1",
            Outcome::Blocked(why.clone()),
        );
        suite.report(
            "8b",
            "transport term does not cost more than 1 point (max fusion)",
            Outcome::Blocked(why),
        );
        return;
    }

    if env::var_os("AMOSL_FULL_PROFILE").is_some() {
        let outcome = match run(&mutag_config(200, 10)) {
            Ok(r) => check(
                r.mean_accuracy >= 0.85,
                format!("accuracy {} (floor 85.0)", r.accuracy_line()),
            ),
            Err(e) => Outcome::Fail(e),
        };
        suite.report("7", "MUTAG 10-fold accuracy >= 0.85", outcome);
    } else {
        suite.report(
            "7",
            "MUTAG 10-fold accuracy >= 0.85",
            Outcome::Blocked("full profile runs only with AMOSL_FULL_PROFILE=1".into()),
        );
    }

    let base = mutag_config(50, 3);
    let fixed = TrainConfig {
        reg_mode: RegMode::FixedOne,
        ..base.clone()
    };
    let without = TrainConfig {
        reg_mode: RegMode::Off,
        ..base.clone()
    };
    let (adaptive, fixed, without) = match (run(&base), run(&fixed), run(&without)) {
        (Ok(a), Ok(f), Ok(w)) => (a, f, w),
        (a, f, w) => {
            let e = [a.err(), f.err(), w.err()]
                .into_iter()
                .flatten()
                .collect::<Vec<_>>()
                .join("; ");
            for (id, title) in [
                ("7r", "MUTAG reduced profile accuracy >= 0.80"),
                ("8a", "adaptive weight keeps a larger final distance than weight 1"),
                ("8b", "transport term does not cost more than 1 point (max fusion)"),
            ] {
                suite.report(id, title, Outcome::Fail(e.clone()));
            }
            return;
        }
    };
    suite.report(
        "7r",
        "MUTAG reduced profile accuracy >= 0.80",
        check(
            adaptive.mean_accuracy >= 0.80,
            format!("50 epochs, 3 folds, accuracy {} (floor 80.0)", adaptive.accuracy_line()),
        ),
    );
    suite.report(
        "8a",
        "adaptive weight keeps a larger final distance than weight 1",
        check(
            adaptive.mean_ot_distance > fixed.mean_ot_distance,
            format!(
                "adaptive {:.4} vs fixed {:.4}",
                adaptive.mean_ot_distance, fixed.mean_ot_distance
            ),
        ),
    );
    suite.report(
        "8b",
        "transport term does not cost more than 1 point (max fusion)",
        check(
            adaptive.mean_accuracy >= without.mean_accuracy - 0.01,
            format!(
                "with {} vs without {}",
                adaptive.accuracy_line(),
                without.accuracy_line()
            ),
        ),
    );
}

fn train_once(config: &Path, out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_amosl"))
        .arg("train")
        .arg("--config")
        .arg(config)
        .arg("--folds")
        .arg("3")
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&status.stderr).trim().to_string())
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().expect("temp dir");
    common::write_marker_dataset(dir.path(), "MARKERS", 24, 9);
    let config = dir.path().join("run.cfg");
    let text = format!(
        "dataset = MARKERS\ndata = {}\nepochs = 4\nbatch_size = 8\nseed = 3\ngrad_mode = kkt_qp\n",
        dir.path().display()
    );
    fs::write(&config, text).expect("write config");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    if let Err(e) = train_once(&config, &a).and_then(|_| train_once(&config, &b)) {
        return Outcome::Fail(e);
    }
    let mut names: Vec<String> = fs::read_dir(&a)
        .expect("run dir")
        .map(|e| e.expect("entry").file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let differing: Vec<&String> = names
        .iter()
        .filter(|n| fs::read(a.join(n)).ok() != fs::read(b.join(n)).ok())
        .collect();
    let ckpts = names.iter().filter(|n| n.ends_with(".ckpt")).count();
    check(
        differing.is_empty() && ckpts == 3 && names.iter().any(|n| n == "metrics.ndjson"),
        format!(
            "{} files compared ({ckpts} checkpoints), differing: {differing:?}",
            names.len()
        ),
    )
}

fn main() -> ExitCode {
    let mut suite = Suite { failures: 0 };
    suite.report("1", "transport solver matches exhaustive enumeration", oracle());
    suite.report("2", "strong duality and feasibility", duality());
    gradients(&mut suite);
    reg_properties(&mut suite);
    suite.report("5", "contribution scores are conserved", conservation());
    dataset_fidelity(&mut suite);
    end_to_end(&mut suite);
    suite.report("9", "repeated training runs are byte-identical", determinism());
    if suite.failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{} criteria failed", suite.failures);
        ExitCode::FAILURE
    }
}
