mod common;

use amosl::graph_io::{make_folds, parse_tudataset, prepare, FeaturePolicy, PreparedDataset};
use amosl::train::{
    cross_validate, evaluate_graphs, prepare_graphs, train_fold, RegMode, RunOptions, Split, TrainConfig,
};

fn marker_dataset(graphs: usize, seed: u64) -> PreparedDataset {
    let dir = tempfile::tempdir().unwrap();
    common::write_marker_dataset(dir.path(), "MARK", graphs, seed);
    let raw = parse_tudataset(dir.path(), "MARK").unwrap();
    prepare(&raw, FeaturePolicy::Auto, seed).unwrap()
}

fn config(epochs: usize, folds: usize) -> TrainConfig {
    TrainConfig {
        dataset: "MARK".into(),
        epochs,
        folds,
        ..TrainConfig::default()
    }
}

fn no_sink() -> impl FnMut(&amosl::train::EpochRecord) -> Result<(), amosl::train::TrainError> {
    |_| Ok(())
}

#[test]
fn two_epoch_smoke_run_on_two_graphs() {
    let ds = marker_dataset(2, 1);
    let cfg = config(2, 2);
    let mut seen = Vec::new();
    let (report, folds) = cross_validate(&ds, &cfg, RunOptions::default(), &mut |r| {
        seen.push(r.clone());
        Ok(())
    })
    .unwrap();
    assert_eq!(folds.len(), 2);
    for f in &folds {
        let test: Vec<_> = f.records.iter().filter(|r| r.split == Split::Test).collect();
        assert_eq!(test.len(), 2);
        assert_eq!((f.train_size, f.test_size), (1, 1));
    }
    assert_eq!(seen.len(), 8);
    assert!(seen.iter().all(|r| r.wall_ms == 0 && r.run_id == cfg.run_id()));
    assert_eq!(report.folds.len(), 2);
}

#[test]
fn separable_toy_is_fit_within_fifty_epochs() {
    let ds = marker_dataset(20, 7);
    let cfg = config(50, 2);
    let graphs = prepare_graphs(&ds, cfg.conv, cfg.modality2).unwrap();
    let split = make_folds(&ds.labels(), 2, cfg.seed).unwrap();
    let result = train_fold(&graphs, &ds, &split, 0, &cfg, RunOptions::default(), &mut no_sink()).unwrap();
    let fwd = amosl::train::ForwardSettings {
        fusion: cfg.fusion,
        dropout: cfg.dropout,
        distance: None,
        grad_mode: cfg.grad_mode,
        reg_mode: RegMode::Off,
    };
    let (_, _, acc, _) = evaluate_graphs(&graphs, &split.train_indices(0), &result.params, &fwd).unwrap();
    assert_eq!(acc, 1.0);
}

#[test]
fn identical_runs_are_identical() {
    let ds = marker_dataset(12, 3);
    let cfg = config(3, 3);
    let (ra, fa) = cross_validate(&ds, &cfg, RunOptions::default(), &mut no_sink()).unwrap();
    let (rb, fb) = cross_validate(&ds, &cfg, RunOptions::default(), &mut no_sink()).unwrap();
    assert_eq!(ra, rb);
    for (a, b) in fa.iter().zip(&fb) {
        assert_eq!(a.records, b.records);
        assert_eq!(a.params, b.params);
    }
}

#[test]
fn folds_partition_the_dataset() {
    let ds = marker_dataset(12, 5);
    let cfg = config(1, 4);
    let (report, _) = cross_validate(&ds, &cfg, RunOptions::default(), &mut no_sink()).unwrap();
    assert_eq!(report.folds.iter().map(|f| f.test_size).sum::<usize>(), 12);
    let mean = report.folds.iter().map(|f| f.test_accuracy).sum::<f64>() / 4.0;
    assert!((report.mean_accuracy - mean).abs() < 1e-15);
}

#[test]
fn reg_modes_and_distances_all_train() {
    let ds = marker_dataset(6, 9);
    for text in [
        "reg_mode = off",
        "reg_mode = fixed_one",
        "reg_update = epoch",
        "distance = euclidean",
        "grad_mode = kkt_qp",
        "fusion = concat\nconv = gcn",
        "fusion = hadamard\nmodality2 = masked",
    ] {
        let mut cfg = TrainConfig::parse(text, None).unwrap();
        cfg.dataset = "MARK".into();
        cfg.epochs = 2;
        cfg.folds = 2;
        let (report, _) = cross_validate(&ds, &cfg, RunOptions::default(), &mut no_sink()).unwrap();
        assert!(
            report.mean_ot_distance.is_finite() && report.mean_ot_distance >= 0.0,
            "{text}"
        );
    }
}
