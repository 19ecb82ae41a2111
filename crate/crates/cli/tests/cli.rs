use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use tempfile::TempDir;

fn povml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_povml"))
        .args(args)
        .env_remove("POVML_THREADS")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &TempDir, rows: Option<usize>) -> PathBuf {
    let path = dir.path().join("survey.csv");
    let mut args = vec!["synth", "--out", p(&path), "--seed", "4"];
    let rows = rows.map(|r| r.to_string());
    if let Some(r) = &rows {
        args.extend(["--rows", r]);
    }
    let out = povml(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

fn write_config(dir: &TempDir, text: &str) -> PathBuf {
    let path = dir.path().join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

const SMALL: &str = r#"{"model": {"kind": "forest", "n_trees": 20}, "pca": {"k": 10}, "eval": {"cv_folds": 3}}"#;

#[test]
fn missing_dataset_exits_2() {
    let dir = TempDir::new().unwrap();
    let out = povml(&["profile", p(&dir.path().join("absent.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    let out = povml(&[
        "train",
        "--dataset",
        p(&dir.path().join("absent.csv")),
        "--model-out",
        p(&dir.path().join("m.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, Some(150));
    let cfg = write_config(&dir, r#"{"model": {"kind": "forest", "trees": 5}}"#);
    let out = povml(&[
        "train",
        "--config",
        p(&cfg),
        "--dataset",
        p(&data),
        "--model-out",
        p(&dir.path().join("m.json")),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn oversized_pca_exits_3_naming_the_stage() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, Some(150));
    let cfg = write_config(
        &dir,
        r#"{"pca": {"k": 400}, "model": {"kind": "forest", "n_trees": 5}}"#,
    );
    let out = povml(&[
        "train",
        "--config",
        p(&cfg),
        "--dataset",
        p(&data),
        "--model-out",
        p(&dir.path().join("m.json")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("reduce"));
    assert!(!dir.path().join("m.json").exists());
}

#[test]
fn profile_checks_published_counts() {
    let dir = TempDir::new().unwrap();
    let full = synth(&dir, None);
    let out = povml(&["profile", p(&full), "--expect-canonical"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let small = dir.path().join("small.csv");
    assert!(povml(&["synth", "--out", p(&small), "--rows", "300"]).status.success());
    let out = povml(&["profile", p(&small), "--expect-canonical"]);
    assert_eq!(out.status.code(), Some(4));
    let out = povml(&["profile", p(&small)]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("300"), "{text}");
}

#[test]
fn saved_models_are_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, Some(400));
    let cfg = write_config(&dir, SMALL);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for (out, threads) in [(&a, "1"), (&b, "2")] {
        let o = povml(&[
            "--threads",
            threads,
            "train",
            "--config",
            p(&cfg),
            "--dataset",
            p(&data),
            "--model-out",
            p(out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = dir.path().join("c.json");
    let o = povml(&[
        "train",
        "--config",
        p(&cfg),
        "--dataset",
        p(&data),
        "--seed",
        "8",
        "--model-out",
        p(&c),
    ]);
    assert!(o.status.success());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn evaluate_smoke_run_writes_reports() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, Some(500));
    let cfg = write_config(&dir, SMALL);
    let out_dir = dir.path().join("eval");
    let start = Instant::now();
    let o = povml(&[
        "evaluate",
        "--config",
        p(&cfg),
        "--dataset",
        p(&data),
        "--out-dir",
        p(&out_dir),
    ]);
    let elapsed = start.elapsed();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(elapsed < Duration::from_secs(10), "{elapsed:?}");
    for f in [
        "report.json",
        "report.csv",
        "audit.log",
        "explained_variance.csv",
        "importance.csv",
    ] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("report.json")).unwrap()).unwrap();
    let acc = report["test"]["accuracy"].as_f64().unwrap();
    assert!(acc > 0.5 && acc <= 1.0, "{acc}");
    assert_eq!(report["cv"]["folds"].as_array().unwrap().len(), 3);
    let csv = std::fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert!(csv.starts_with("model,metric,value"));
    let audit = std::fs::read_to_string(out_dir.join("audit.log")).unwrap();
    assert!(audit.contains("config_hash"));
}

#[test]
fn wrangle_cv_and_importance_commands() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, Some(300));
    let cfg = write_config(&dir, SMALL);
    let table = dir.path().join("features.csv");
    let o = povml(&[
        "wrangle",
        "--dataset",
        p(&data),
        "--out",
        p(&table),
        "--audit",
        p(&dir.path().join("w.log")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let header = std::fs::read_to_string(&table).unwrap();
    let header = header.lines().next().unwrap();
    assert!(header.contains("meaneduc") && header.contains("dependency"));

    let cv = dir.path().join("cv.json");
    let o = povml(&["cv", "--config", p(&cfg), "--dataset", p(&data), "--out", p(&cv)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&cv).unwrap()).unwrap();
    assert_eq!(report["folds"].as_array().unwrap().len(), 3);

    let model = dir.path().join("m.json");
    let nopca = write_config(
        &dir,
        r#"{"pca": {"enabled": false}, "model": {"kind": "gbt", "iterations": 10}}"#,
    );
    assert!(povml(&[
        "train",
        "--config",
        p(&nopca),
        "--dataset",
        p(&data),
        "--model-out",
        p(&model)
    ])
    .status
    .success());
    let imp = dir.path().join("imp.csv");
    let o = povml(&["importance", "--model", p(&model), "--out", p(&imp)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&imp).unwrap();
    assert!(text.starts_with("rank,feature,fraction"));
    let total: f64 = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-9, "{total}");
}
