use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &[&str] = &["--set", "grid.points=120"];

fn rsgrowth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsgrowth"))
        .args(args)
        .env_remove("RSGROWTH_OUT")
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn error_doc(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is a JSON error document")
}

#[test]
fn solve_writes_artifacts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = rsgrowth(&[&["solve", "--out", d.to_str().unwrap()], SMALL].concat());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["value_policy.csv", "solve.json", "assumptions.json", "config.json"] {
        let x = std::fs::read(a.join(name)).unwrap();
        assert_eq!(x, std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    let csv = std::fs::read_to_string(a.join("value_policy.csv")).unwrap();
    assert!(csv.starts_with("x,value,invest,consume\n"));
    assert_eq!(csv.lines().count(), 121);
    let solve = read_json(&a.join("solve.json"));
    assert!(solve["contraction_modulus"].as_f64().unwrap() < 1.0);
    assert_eq!(solve["grid"]["points"], 120);
}

#[test]
fn euler_summary_has_window() {
    let dir = tempfile::tempdir().unwrap();
    let out = rsgrowth(&[&["euler", "--out", dir.path().to_str().unwrap()], SMALL].concat());
    assert!(out.status.success());
    let s = read_json(&dir.path().join("euler_summary.json"));
    assert!(s["median"].as_f64().unwrap() < 1e-2);
    assert_eq!(s["window"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("envelope.json").exists());
}

#[test]
fn additive_drift_fails_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let args = [&["drift", "--preset", "additive", "--out", dir.path().to_str().unwrap()], SMALL].concat();
    let out = rsgrowth(&args);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_doc(&out)["error"]["code"], "drift_failed");
    let drift = read_json(&dir.path().join("drift.json"));
    assert_eq!(drift["verdict"], "fail");
    assert_eq!(drift["d1"]["passed"], false);
    assert!(drift["d1"]["limit_estimate"].as_f64().unwrap() > 1.0);
}

#[test]
fn multiplicative_drift_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = rsgrowth(&[&["drift", "--out", dir.path().to_str().unwrap()], SMALL].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_json(&dir.path().join("drift.json"))["verdict"], "pass");
}

#[test]
fn simulate_writes_traces_and_ecdf() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let args = [
        &["simulate", "--out", d, "--seed", "11"][..],
        SMALL,
        &["--set", "simulate.chains=2", "--set", "simulate.steps=4000", "--set", "simulate.burn_in=500"],
    ]
    .concat();
    let out = rsgrowth(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(dir.path().join("trace_1.csv")).unwrap();
    assert!(trace.starts_with("t,x\n"));
    assert_eq!(trace.lines().count(), 4002);
    assert!(!dir.path().join("trace_2.csv").exists());
    let sim = read_json(&dir.path().join("simulate.json"));
    assert_eq!(sim["seeds"], serde_json::json!([11, 12]));
    assert_eq!(sim["samples"], 2 * 3500);
    assert!(dir.path().join("ecdf.csv").exists());
}

#[test]
fn report_collates_and_lists_missing() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert!(rsgrowth(&[&["solve", "--out", d], SMALL].concat()).status.success());
    assert!(rsgrowth(&["report", "--out", d]).status.success());
    let report = read_json(&dir.path().join("report.json"));
    assert!(report["artifacts"]["solve"].is_object());
    assert!(report["artifacts"]["config"].is_object());
    let missing: Vec<&str> = report["missing"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(missing.contains(&"verify") && missing.contains(&"drift"));
}

#[test]
fn report_on_empty_dir_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = rsgrowth(&["report", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_doc(&out)["error"]["code"], "no_artifacts");
}

#[test]
fn bad_inputs_exit_two_with_json_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"model": {}, "grid": {}}"#).unwrap();
    let d = dir.path().to_str().unwrap();
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["solve", "--config", bad.to_str().unwrap(), "--out", d], "invalid_config"),
        (vec!["solve", "--preset", "nonesuch", "--out", d], "unknown_parameter"),
        (vec!["solve", "--set", "model.beta", "--out", d], "invalid_override"),
        (vec!["solve", "--frobnicate"], "invalid_arguments"),
    ];
    for (args, code) in cases {
        let out = rsgrowth(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let doc = error_doc(&out);
        assert_eq!(doc["error"]["code"], code, "{args:?}");
        assert_eq!(doc["error"]["exit_code"], 2);
    }
}

#[test]
fn invalid_model_parameter_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = rsgrowth(&["solve", "--set", "model.beta=1.5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_doc(&out)["error"]["code"].is_string());
}

#[test]
fn output_dir_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_rsgrowth"))
        .args(["solve", "--set", "grid.points=64"])
        .env("RSGROWTH_OUT", &target)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(target.join("solve.json").exists());
    assert!(!dir.path().join("rsgrowth-out").exists());
}

#[test]
fn verify_passes_on_multiplicative_preset() {
    let dir = tempfile::tempdir().unwrap();
    let out = rsgrowth(&["verify", "--preset", "multiplicative", "--out", dir.path().to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 14);
    let report = read_json(&dir.path().join("verify.json"));
    assert_eq!(report["passed"], true);
    assert_eq!(report["gates"].as_array().unwrap().len(), 14);
}
