mod common;

use std::process::Command;

use common::{small_dataset_file, small_run_config};
use mlkit::ensemble::{Topology, fuse_weighted_external, fused_threshold, normalize_enn};
use mlkit::harness::{
    evaluate_model, load_dataset, run_experiment, run_on_dataset, train_on_dataset, Augmentation, ClusterCount,
    ExperimentReport, MODEL_ENN, MODEL_ENN_3EXT, MODEL_ENN_EXT,
};
use mlkit::metrics::{MetricReport, PredictionSet};
use mlkit::numerics::{RngStream, Tensor};

#[test]
fn report_has_one_record_per_fold_and_model_plus_means() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset_file(dir.path(), 40, 1);
    let mut cfg = small_run_config(&data, &dir.path().join("out"));
    cfg.members = 1;
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.folds.len(), 2);
    assert!(report.failed_folds().next().is_none());
    assert_eq!(report.folds.iter().map(|f| f.n_test).sum::<usize>(), 40);
    let text = report.to_text();
    let records: Vec<&str> = text.lines().filter(|l| l.contains(" model=")).collect();
    assert_eq!(records.len(), 3, "{text}");
    assert!(records[2].contains("fold=mean"));
    for f in ["report.txt", "report.json", "config.json"] {
        assert!(cfg.output_dir.join(f).exists(), "{f}");
    }
    let parsed: ExperimentReport =
        serde_json::from_str(&std::fs::read_to_string(cfg.output_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(parsed.folds.len(), 2);
    let m = report.mean_of(MODEL_ENN).unwrap().values();
    let per: Vec<[f64; 10]> = report.folds.iter().map(|f| f.models[0].metrics.values()).collect();
    for k in 0..10 {
        assert!((m[k] - (per[0][k] + per[1][k]) / 2.0).abs() < 1e-12);
    }
}

#[test]
fn external_rows_score_the_weighted_sum() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset_file(dir.path(), 30, 2);
    let cfg = small_run_config(&data, &dir.path().join("out"));
    let ds = load_dataset(&data).unwrap();
    let art = train_on_dataset(&cfg, &ds).unwrap();
    let test = art.preprocessor.apply_dataset(&ds).unwrap();
    let mut rng = RngStream::from_seed(3);
    let ext = Tensor::new(vec![ds.n(), ds.l()], (0..ds.n() * ds.l()).map(|_| rng.uniform()).collect()).unwrap();
    let rows = evaluate_model(&art.model, &test, Some(&ext)).unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r.model.as_str()).collect();
    assert_eq!(names, [MODEL_ENN, MODEL_ENN_EXT, MODEL_ENN_3EXT]);
    let enn = normalize_enn(&art.model.predict(&test.x).unwrap());
    for (row, w) in rows[1..].iter().zip([1.0, 3.0]) {
        let fused = fuse_weighted_external(&enn, &ext, w).unwrap();
        let ps = PredictionSet::from_scores(test.y.clone(), fused, fused_threshold(w)).unwrap();
        assert_eq!(row.metrics, MetricReport::compute(&ps));
    }
}

#[test]
fn cluster_count_is_capped_by_the_training_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset_file(dir.path(), 40, 4);
    let ds = load_dataset(&data).unwrap();
    let mut cfg = small_run_config(&data, &dir.path().join("out"));
    cfg.folds = mlkit::harness::FoldScheme::KFold(3);
    cfg.augmentation = Augmentation::Clusters {
        count: ClusterCount::Fixed(27),
        weight: 1.0,
    };
    let report = run_on_dataset(&cfg, &ds, None).unwrap();
    assert!(report.failed_folds().next().is_none());
    for f in &report.folds {
        assert_eq!(f.clusters, Some(f.n_train.min(27)));
    }
}

#[test]
fn failing_folds_are_recorded_not_raised() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset_file(dir.path(), 2, 7);
    let ds = load_dataset(&data).unwrap();
    let mut cfg = small_run_config(&data, &dir.path().join("out"));
    cfg.topologies = vec![Topology::GruB];
    // one training row per fold leaves batch statistics undefined
    let report = run_on_dataset(&cfg, &ds, None).unwrap();
    assert_eq!(report.folds.len(), 2);
    assert_eq!(report.failed_folds().count(), 2);
    for f in &report.folds {
        assert!(f.error.as_deref().unwrap().starts_with("train:"), "{:?}", f.error);
    }
    assert!(report.mean.is_empty());
    assert!(report.to_text().contains("# fold 1 failed: train: "));
}

#[test]
fn experiments_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset_file(dir.path(), 36, 5);
    let a = small_run_config(&data, &dir.path().join("a"));
    let b = small_run_config(&data, &dir.path().join("b"));
    run_experiment(&a).unwrap();
    run_experiment(&b).unwrap();
    for f in ["report.txt", "report.json"] {
        assert_eq!(std::fs::read(a.output_dir.join(f)).unwrap(), std::fs::read(b.output_dir.join(f)).unwrap());
    }
}

fn mlkit(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mlkit")).args(args).output().unwrap()
}

#[test]
fn cli_train_evaluate_kfold_and_preview() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset_file(dir.path(), 30, 6);
    let data = data.to_str().unwrap();
    let model_dir = dir.path().join("model");
    let common = [
        "--dataset", data, "--members", "2", "--epochs", "2", "--hidden-units", "4", "--input-encoding", "single-step",
    ];

    let mut args = vec!["train"];
    args.extend(common);
    args.extend(["--output-dir", model_dir.to_str().unwrap()]);
    let out = mlkit(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(model_dir.join("model.json").exists());

    let out = mlkit(&["evaluate", "--model-dir", model_dir.to_str().unwrap(), "--dataset", data]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("model=ENN"));

    let kdir = dir.path().join("kfold");
    let mut args = vec!["kfold"];
    args.extend(common);
    args.extend(["--folds", "kfold:2", "--output-dir", kdir.to_str().unwrap()]);
    let out = mlkit(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(kdir.join("report.txt").exists());

    let out = mlkit(&["augment-preview", "--dataset", data, "--clusters", "4"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().filter(|l| l.starts_with("center ")).count(), 4);

    let out = mlkit(&["kfold", "--dataset", data, "--members", "0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("members"));
}
