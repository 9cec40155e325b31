use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn qbound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbound"))
        .args(args)
        .env_remove("QBOUND_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON output")
}

fn matrix(v: &Value) -> Vec<Vec<f64>> {
    serde_json::from_value(v.clone()).unwrap()
}

#[test]
fn helstrom_closed_forms() {
    let h = matrix(&json(&qbound(&["helstrom", "--model", "bloch_full", "--theta", "0,0,0"]))["H"]);
    for (i, row) in h.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            assert!((x - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
    }
    let h = matrix(&json(&qbound(&["helstrom", "--model", "bloch_full", "--theta", "0,0,0.6"]))["H"]);
    assert!((h[2][2] - 1.0 / 0.64).abs() < 1e-12);
}

#[test]
fn missing_theta_is_a_usage_error() {
    let out = qbound(&["helstrom", "--model", "bloch_full"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn bad_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("badmatrix.json");
    fs::write(&bad, "[[1, 0], [0, -1]]").unwrap();
    let w = format!("file:{}", bad.display());
    let cases: Vec<Vec<&str>> = vec![
        vec!["holevo", "--model", "bloch_equatorial", "--weight", &w],
        vec!["helstrom", "--model", "bloch_full", "--theta", "0,0"],
        vec!["helstrom", "--model", "bloch_full", "--theta", "0,0,2"],
        vec!["helstrom", "--model", "no_such_model", "--theta", "0"],
        vec!["helstrom", "--model", "bloch_full", "--theta", "0,0,0", "--format", "csv"],
        vec!["bayes", "--model", "bloch_full", "--prior", "bump:1.5"],
    ];
    for args in cases {
        assert_eq!(qbound(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn holevo_closed_forms() {
    let v = json(&qbound(&["holevo", "--model", "bloch_full", "--theta", "0,0,0.5", "--weight", "helstrom_quarter"]));
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    assert!((v["dual_value"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    let v = json(&qbound(&["holevo", "--model", "pure_dim_d", "--dim", "3", "--weight", "helstrom_quarter"]));
    assert!((v["value"].as_f64().unwrap() - 2.0).abs() < 1e-3);
}

#[test]
fn check_dual_reproduces_the_reported_slack() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("solution.json");
    let out = qbound(&[
        "holevo", "--model", "bloch_equatorial", "--theta", "0.3,-0.4", "--basis", "x", "--output",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let saved: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let check = json(&qbound(&["check-dual", "--solution", path.to_str().unwrap(), "--basis", "x"]));
    assert_eq!(saved["dual_check"]["slack"], check["slack"]);
    assert!(check["satisfied"].as_bool().unwrap());

    // An information matrix above the dual bound is reported as a violation.
    let out = qbound(&["check-dual", "--solution", path.to_str().unwrap(), "--info", "[[100, 0], [0, 100]]"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bayes_equatorial_is_one_half() {
    let v = json(&qbound(&["bayes", "--model", "bloch_equatorial", "--prior", "bump:0.8"]));
    let err = v["error_estimate"].as_f64().unwrap();
    assert!((v["value"].as_f64().unwrap() - 0.5).abs() <= err.max(1e-9));
}

#[test]
fn bayes_reports_j_and_van_trees() {
    let v = json(&qbound(&[
        "bayes", "--model", "bloch_equatorial", "--prior", "bump:0.8", "--j", "--scheme", "pauli", "--n-copies",
        "100,1000",
    ]));
    assert!(v["j"]["value"].as_f64().unwrap() > 0.0);
    let rhs: Vec<(f64, f64)> = serde_json::from_value(v["van_trees"]["rhs"].clone()).unwrap();
    assert!(rhs[1].1 > rhs[0].1);
}

#[test]
fn simulate_csv_columns_and_worker_independence() {
    let base = [
        "simulate", "--model", "bloch_equatorial", "--prior", "bump:0.8", "--scheme", "two-step", "--n-copies",
        "100,400", "--trials", "200", "--seed", "5", "--format", "csv",
    ];
    let run = |workers: &str| {
        let mut args = base.to_vec();
        args.extend(["--workers", workers]);
        let out = qbound(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    let one = run("1");
    let four = run("4");
    assert_eq!(one, four);
    let mut lines = one.lines();
    assert_eq!(
        lines.next().unwrap(),
        "family,scheme,estimator,N,trials,value,std_error,bound,slack"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(r[0], "bloch_equatorial");
        let value: f64 = r[5].parse().unwrap();
        let bound: f64 = r[7].parse().unwrap();
        let slack: f64 = r[8].parse().unwrap();
        assert!((value - bound - slack).abs() < 1e-12);
    }
}

#[test]
fn seed_comes_from_the_environment() {
    let args = [
        "simulate", "--model", "pure_qubit", "--n-copies", "50", "--trials", "20", "--no-bound", "--format", "csv",
    ];
    let with_env = |seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_qbound")).args(args).env("QBOUND_SEED", seed).output().unwrap().stdout
    };
    assert_eq!(with_env("3"), with_env("3"));
    assert_ne!(with_env("3"), with_env("4"));
}

#[test]
fn simulate_run_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{
            "model": {"family": "bloch_full"},
            "prior": {"family": "bump", "radius": 0.9},
            "scheme": {"kind": "alternating_bases", "bases": [{"type": "pauli", "axis": 0}, {"type": "pauli", "axis": 1}, {"type": "pauli", "axis": 2}]},
            "estimator": {"kind": "mle"},
            "n_copies": [100],
            "trials": 50
        }"#,
    )
    .unwrap();
    let v = json(&qbound(&["simulate", "--config", cfg.to_str().unwrap()]));
    assert_eq!(v["rows"][0]["N"], 100);
    assert_eq!(v["rows"][0]["scheme"], "alternating_bases");

    fs::write(&cfg, r#"{"model": {"family": "bloch_full"}, "surprise": 1}"#).unwrap();
    assert_eq!(qbound(&["simulate", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn verify_paper_passes_and_is_deterministic() {
    let a = qbound(&["verify-paper", "--seed", "11"]);
    let b = qbound(&["verify-paper", "--seed", "11"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stdout));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.lines().skip(2).all(|l| l.ends_with("PASS")));
}

#[test]
fn verify_paper_fails_with_an_impossible_tolerance() {
    // The covariant-information row has a strictly positive deviation.
    let out = qbound(&["verify-paper", "--holevo-tol", "0", "--format", "json"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let all_pass = v["all_pass"].as_bool().unwrap();
    assert_eq!(out.status.code(), Some(if all_pass { 0 } else { 1 }));
}
