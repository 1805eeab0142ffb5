mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn amosl(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amosl"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn workspace(graphs: usize) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    common::write_marker_dataset(dir.path(), "MARKERS", graphs, 2);
    fs::write(
        dir.path().join("run.cfg"),
        "# small run\ndataset = MARKERS\ndata = .\nepochs = 2\nbatch_size = 4\nfolds = 2\n",
    )
    .unwrap();
    dir
}

#[test]
fn prepare_train_and_eval_round_trip() {
    let dir = workspace(12);
    let p = dir.path();
    let o = amosl(
        &[
            "prepare",
            "--data-dir",
            ".",
            "--name",
            "MARKERS",
            "--seed",
            "0",
            "--out",
            "markers.bin",
        ],
        p,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("12 graphs, 2 classes"));

    let o = amosl(&["train", "--config", "run.cfg", "--out", "out"], p);
    assert!(o.status.success(), "{}", stderr(&o));
    let metrics = fs::read_to_string(p.join("out/metrics.ndjson")).unwrap();
    assert_eq!(metrics.lines().count(), 2 * 2 * 2);
    let first: serde_json::Value = serde_json::from_str(metrics.lines().next().unwrap()).unwrap();
    let keys: Vec<&str> = first.as_object().unwrap().keys().map(String::as_str).collect();
    for k in [
        "run_id",
        "fold",
        "epoch",
        "split",
        "l0",
        "ot_distance",
        "reg",
        "lambda",
        "accuracy",
        "wall_ms",
    ] {
        assert!(keys.contains(&k), "{k}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p.join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["folds"].as_array().unwrap().len(), 2);

    let o = amosl(&["eval", "--model", "out/fold_0.ckpt", "--data", "markers.bin"], p);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("on 12 graphs"));
}

#[test]
fn config_errors_are_reported_with_line_numbers() {
    let dir = workspace(6);
    fs::write(dir.path().join("bad.cfg"), "dataset = MARKERS\nlearning_rat = 0.1\n").unwrap();
    let o = amosl(&["train", "--config", "bad.cfg"], dir.path());
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("line 2") && err.contains("learning_rat"), "{err}");

    let o = amosl(&["train", "--config", "run.cfg", "--folds", "1"], dir.path());
    assert!(!o.status.success());
}

#[test]
fn audits_exit_zero_when_they_pass() {
    let dir = tempfile::tempdir().unwrap();
    let o = amosl(&["ot-oracle", "--trials", "50", "--seed", "3"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("0 mismatches"));

    for mode in ["envelope", "kkt_qp"] {
        let o = amosl(&["gradcheck", "--mode", mode, "--eps", "1e-3"], dir.path());
        assert!(o.status.success(), "{}", stdout(&o));
        assert!(!stdout(&o).contains("FAIL"));
    }
    let o = amosl(&["gradcheck", "--eps", "0"], dir.path());
    assert!(!o.status.success());
}

#[test]
fn ablation_and_grid_write_tables() {
    let dir = workspace(8);
    let p = dir.path();
    let o = amosl(
        &["ablate", "--axis", "adaptive", "--config", "run.cfg", "--out", "abl"],
        p,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("fixed") && stdout(&o).contains("adaptive"));
    let table: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p.join("abl/ablation_adaptive.json")).unwrap()).unwrap();
    assert_eq!(table["rows"].as_array().unwrap().len(), 2);

    let o = amosl(
        &[
            "grid",
            "--config",
            "run.cfg",
            "--gammas",
            "0.5,0.9",
            "--lambdas",
            "1e-3",
            "--out",
            "grid",
        ],
        p,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let grid: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("grid/grid.json")).unwrap()).unwrap();
    assert_eq!(grid["points"].as_array().unwrap().len(), 2);
    assert!(stdout(&o).contains("best: gamma"));
}
