use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dirmean"));
    c.env_remove("DIRMEAN_THREADS");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn dirmean")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("ERROR 1:"));
}

#[test]
fn missing_config_exits_one() {
    let o = run(&["simulate"]);
    assert_eq!(o.status.code(), Some(1));
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("absent.json");
    let o = run(&["simulate", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.starts_with("ERROR 1:"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn malformed_config_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.json", "{ \"n_total\": ");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn too_few_rows_exits_two_with_minimum() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = configs().join("spec_gaussian.json");
    let o = run(&[
        "estimate",
        "--spec",
        spec.to_str().unwrap(),
        "--rows",
        "30",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.starts_with("ERROR 2:"), "{err}");
    assert!(err.contains("150"), "{err}");
}

#[test]
fn unreadable_data_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&[
        "estimate",
        "--data",
        tmp.path().join("nope.csv").to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("ERROR 3:"));
}

#[test]
fn unknown_format_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&[
        "lowerbound",
        "--format",
        "yaml",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn estimate_from_csv_recovers_constant_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let rows: String = (0..300).map(|_| "1.5,-2,0.25\n").collect();
    let data = write(tmp.path(), "x.csv", &rows);
    let out = tmp.path().join("out");
    let o = run(&[
        "estimate",
        "--data",
        data.to_str().unwrap(),
        "--delta",
        "0.05",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("estimate.json")).unwrap()).unwrap();
    let mu: Vec<f64> = v["mu_hat"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    for (a, b) in mu.iter().zip([1.5, -2.0, 0.25]) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
    assert!(v["rho_star"].as_f64().unwrap() < 1e-12);
    for key in [
        "directions_used",
        "refinement_rounds",
        "probe_violation",
        "converged",
        "block_plan_mean",
        "block_plan_var",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn estimate_csv_format() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = configs().join("spec_gaussian.json");
    let o = run(&[
        "estimate",
        "--spec",
        spec.to_str().unwrap(),
        "--rows",
        "1500",
        "--format",
        "csv",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(tmp.path().join("estimate.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn simulate_writes_table_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("gaussian_small.json");
    let o = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(tmp.path().join("trials.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next(),
        Some("trial,estimator,dir_index,error,sigma_u,weak_term,strong_term_k1,strong_term_k2")
    );
    // 10 trials x 3 estimators x 16 probes
    assert_eq!(lines.count(), 10 * 3 * 16);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["estimators"].as_array().unwrap().len(), 3);
}

#[test]
fn simulate_seed_flag_changes_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("gaussian_small.json");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for (dir, seed) in [(&a, "1"), (&b, "2")] {
        let o = run(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(o.status.success());
    }
    assert_ne!(
        std::fs::read(a.join("trials.csv")).unwrap(),
        std::fs::read(b.join("trials.csv")).unwrap()
    );
}

#[test]
fn threads_env_fallback_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("gaussian_small.json");
    let o = bin()
        .env("DIRMEAN_THREADS", "2")
        .args([
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            tmp.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn diagnose_writes_all_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "diag.json",
        r#"{ "distribution": { "family": "gaussian", "eigenvalues": [1, 1, 1] },
             "sample_size": 2000, "ratio_rows": 40000, "n_dirs": 5,
             "small_ball": { "m": 20, "trials": 10000 } }"#,
    );
    let out = tmp.path().join("out");
    let o = run(&[
        "diagnose",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in [
        "ratio_properties.json",
        "ratios.json",
        "ratios.csv",
        "small_ball.json",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let def: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("ratio_properties.json")).unwrap()).unwrap();
    assert!(def["report"]["eta"].as_f64().is_some());
}

#[test]
fn lowerbound_rejects_non_gaussian() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "lb.json",
        r#"{ "distribution": { "family": "elliptical-student", "dof": 5, "eigenvalues": [1, 1] }, "trials": 10 }"#,
    );
    let o = run(&[
        "lowerbound",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn lowerbound_report_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "lb.json",
        r#"{ "distribution": { "family": "gaussian", "eigenvalues": [1, 0.5, 0.25, 0.2, 0.1, 0.05, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01] },
             "delta": 0.36787944117144233, "trials": 50 }"#,
    );
    let o = run(&[
        "lowerbound",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("lowerbound.json")).unwrap()).unwrap();
    let k0 = v["k0"].as_f64().unwrap();
    assert!((k0 - (1.0 + (2.0 + 2f64.sqrt()).powi(2))).abs() < 1e-9);
    assert_eq!(v["k"].as_u64(), Some(12));
}
