use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deconfound-lab"))
        .args(args)
        .env_remove("DECONFOUND_SEED")
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--reps", "3", "--n1", "100,1000", "--grid", "-3:3:0.25", "--out", path(out)];
    args.extend_from_slice(extra);
    lab(&args)
}

#[test]
fn simulate_writes_outputs_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = simulate(&out, &["--workers", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("quadratic"));
    assert!(stdout.contains("hierarchical"));
    for f in ["results.csv", "summary.csv", "diagnostics.csv", "plan.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let plan: Value = serde_json::from_str(&std::fs::read_to_string(out.join("plan.json")).unwrap()).unwrap();
    assert_eq!(plan["replications"], 3);
}

#[test]
fn summarize_reproduces_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert!(simulate(&out, &["--scenario", "linear"]).status.success());
    let again = dir.path().join("again.csv");
    let o = lab(&["summarize", path(&out.join("results.csv")), "--out", path(&again)]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(again).unwrap(), std::fs::read(out.join("summary.csv")).unwrap());
}

#[test]
fn seed_flag_and_env_agree() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(simulate(&a, &["--scenario", "linear", "--seed", "11"]).status.success());
    let o = Command::new(env!("CARGO_BIN_EXE_deconfound-lab"))
        .args(["simulate", "--reps", "3", "--n1", "100,1000", "--grid", "-3:3:0.25", "--scenario", "linear"])
        .args(["--out", path(&b)])
        .env("DECONFOUND_SEED", "11")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(std::fs::read(a.join("results.csv")).unwrap(), std::fs::read(b.join("results.csv")).unwrap());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"scenario": "quadratic", "reps": 50, "n1": [100], "mode": "single"}"#).unwrap();
    let out = dir.path().join("run");
    let o = lab(&["simulate", "--config", path(&cfg), "--reps", "2", "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let plan: Value = serde_json::from_str(&std::fs::read_to_string(out.join("plan.json")).unwrap()).unwrap();
    assert_eq!(plan["replications"], 2);
    assert_eq!(plan["methods"], serde_json::json!(["rct1_only"]));
    assert_eq!(plan["scenarios"].as_array().unwrap().len(), 1);
}

#[test]
fn dump_then_fit_recovers_the_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert!(simulate(&out, &["--scenario", "quadratic", "--dump"]).status.success());
    let dump = out.join("dump");
    let fit_dir = dir.path().join("fit");
    let o = lab(&[
        "fit",
        "--obs",
        path(&dump.join("obs_quadratic.csv")),
        "--rct",
        path(&dump.join("rct1_quadratic_n1000.csv")),
        "--rct",
        path(&dump.join("rct2_quadratic.csv")),
        "--out",
        path(&fit_dir),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let model: Value =
        serde_json::from_str(&std::fs::read_to_string(fit_dir.join("eta_hierarchical.json")).unwrap()).unwrap();
    assert_eq!(model["eta"]["mode"], "hierarchical");

    let oracle: Value = serde_json::from_slice(&lab(&["oracle", "--scenario", "quadratic"]).stdout).unwrap();
    let tau: Vec<f64> = serde_json::from_value(oracle["tau1"].clone()).unwrap();
    let mut rdr = csv::Reader::from_path(fit_dir.join("tau1_hierarchical.csv")).unwrap();
    let mut worst: f64 = 0.0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let x: f64 = rec[0].parse().unwrap();
        let tau_hat: f64 = rec[3].parse().unwrap();
        let truth: f64 = tau.iter().rev().fold(0.0, |acc, c| acc * x + c);
        if (1.5..=2.0).contains(&x) {
            worst = worst.max((tau_hat - truth).abs());
        }
    }
    assert!(worst < 3.0, "max error inside the first trial {worst}");
}

#[test]
fn oracle_prints_closed_forms() {
    let o = lab(&["oracle", "--scenario", "linear"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["eta1"], serde_json::json!([2.0, -1.0]));
    assert_eq!(v["eta2"], serde_json::json!([1.0, -2.0]));
    assert_eq!(v["posterior1"]["treated"], 0.7);
    let both: Value = serde_json::from_slice(&lab(&["oracle"]).stdout).unwrap();
    assert_eq!(both.as_array().unwrap().len(), 2);
}

#[test]
fn oracle_brute_force_is_attached() {
    let o = lab(&["oracle", "--scenario", "linear", "--brute-force", "--n", "200000", "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let trials = v["brute_force"]["trials"].as_array().unwrap();
    assert_eq!(trials.len(), 2);
    assert!(trials[0]["tau_max_dev"].as_f64().unwrap() < 0.2);
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lab(&["simulate", "--reps", "0"]).status.code(), Some(2));
    assert_eq!(lab(&["simulate", "--grid", "3:-3:1"]).status.code(), Some(2));
    assert_eq!(lab(&["simulate", "--n1", "abc"]).status.code(), Some(2));
    let missing = dir.path().join("missing.csv");
    assert_eq!(
        lab(&["fit", "--obs", path(&missing), "--rct", path(&missing), "--mode", "single"]).status.code(),
        Some(3)
    );
    assert_eq!(
        lab(&["fit", "--obs", path(&missing), "--rct", path(&missing)]).status.code(),
        Some(2)
    );
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "scenario,n1\nlinear,x\n").unwrap();
    assert_eq!(lab(&["summarize", path(&bad)]).status.code(), Some(2));
}
