use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rydberg-asa"))
        .args(args)
        .env("RYDBERG_ASA_OUT", out)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn unknown_scenario_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["simulate", "--scenario", "NOPE"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown scenario"));
}

#[test]
fn missing_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.json");
    let o = run(dir.path(), &["optimize", "--config", missing.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn malformed_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"base": "LIM-SA", "ga": {"populaton": 4}}"#).unwrap();
    let o = run(dir.path(), &["optimize", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn bad_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["simulate", "--bogus"])), 2);
    assert_eq!(code(&run(dir.path(), &["budget", "--scenario", "III-ASA", "--gamma-d", "fast"])), 2);
}

#[test]
fn simulate_writes_result_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["simulate", "--scenario", "III-ASA"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&dir.path().join("iii_asa_result.json"));
    let f = v["result"]["fidelity_ideal"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f));
    assert_eq!(v["scenario"], "III-ASA");
    let csv = fs::read_to_string(dir.path().join("iii_asa_trajectory.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("t (us),"));
    assert!(header.contains("(MHz)"));
    assert!(csv.lines().count() > 10);
}

#[test]
fn simulate_config_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"base": "III-ASA", "overrides": {"duration_us": 0.2}}"#).unwrap();
    let o = run(dir.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&dir.path().join("iii_asa_result.json"));
    assert!((v["result"]["duration"].as_f64().unwrap() - 0.2).abs() < 1e-12);
}

#[test]
fn simulate_acceleration_panel_reports_p() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["simulate", "--scenario", "FIG2-a"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&dir.path().join("fig2_a_acceleration.json"));
    let p = v["p"].as_f64().unwrap();
    assert!((p - 0.0991).abs() < 0.005, "p = {p}");
}

#[test]
fn out_flag_overrides_environment() {
    let dir = tempfile::tempdir().unwrap();
    let other = dir.path().join("elsewhere");
    let o = run(
        dir.path(),
        &["simulate", "--scenario", "LIM-SA", "--out", other.to_str().unwrap()],
    );
    assert_eq!(code(&o), 0);
    assert!(other.join("lim_sa_result.json").exists());
    assert!(!dir.path().join("lim_sa_result.json").exists());
}

#[test]
fn optimize_batch_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "optimize", "--scenario", "LIM-ASA", "--runs", "5", "--seed", "7", "--population", "6",
        "--generations", "2", "--quiet",
    ];
    let oa = run(a.path(), &args);
    assert_eq!(code(&oa), 0, "{}", String::from_utf8_lossy(&oa.stderr));
    assert_eq!(code(&run(b.path(), &args)), 0);
    let name = "lim_asa_asa-free_runs.csv";
    let csv = fs::read_to_string(a.path().join(name)).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.lines().next().unwrap().contains("best_fidelity"));
    assert_eq!(csv, fs::read_to_string(b.path().join(name)).unwrap());
    let json_name = "lim_asa_asa-free_optimize.json";
    assert_eq!(
        fs::read(a.path().join(json_name)).unwrap(),
        fs::read(b.path().join(json_name)).unwrap()
    );
}

#[test]
fn budget_rejects_single_ancilla_free_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["budget", "--scenario", "III-SA"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("ancilla"));
}

#[test]
fn budget_writes_sweeps_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "budget", "--scenario", "III-ASA", "--epsilon", "0.02", "--eta", "0.02", "--gamma-d",
            "100kHz", "--leakage", "--samples", "101", "--points", "5",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&dir.path().join("iii_asa_budget.json"));
    let e_d = v["report"]["e_d"].as_array().unwrap();
    let at = e_d.iter().find(|r| r[0].as_f64() == Some(0.1)).expect("requested rate present");
    assert!(at[1].as_f64().unwrap() > 0.0);
    assert!(v["report"]["e_k"].as_f64().unwrap() > 0.0);
    let sweep = fs::read_to_string(dir.path().join("iii_asa_epsilon_sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 6);
    assert!(sweep.starts_with("epsilon (dimensionless)"));
}

#[test]
fn reproduce_properties_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["reproduce", "properties"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
    assert!(dir.path().join("reproduce_properties.csv").exists());
}

#[test]
fn reproduce_unknown_target_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["reproduce", "fig9"])), 2);
}
