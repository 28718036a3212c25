use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn thermo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thermo"))
        .args(args)
        .env_remove("THERMO_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn asymptotic_optimum_and_provenance() {
    let v = json(&thermo(&["optimize", "--mode", "asymptotic"]));
    assert!((v["x_star"].as_f64().unwrap() - 2.9682).abs() < 2e-3);
    assert_eq!(v["provenance"]["tool"], "thermo");
    assert_eq!(v["provenance"]["command"], "optimize");
    assert_eq!(v["provenance"]["seed"], 0);
}

#[test]
fn tables_pass_and_emit_csv() {
    let out = thermo(&["tables"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# provenance:"));
    assert!(text.lines().count() > 10);
}

#[test]
fn exit_codes() {
    assert_eq!(thermo(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        thermo(&["fisher", "--spectrum", "/nonexistent/spectrum.json"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        thermo(&["optimize", "--mode", "global", "--levels", "100000"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(thermo(&["robustness", "--trials", "2"]).status.code(), Some(2));
}

#[test]
fn fixed_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "s.json", r#"{"two_level":{"n":8,"n0":2,"x":2.0}}"#);
    let args = [
        "--seed",
        "41",
        "simulate",
        "--spectrum",
        spec.as_str(),
        "--temperature",
        "1",
        "--tau",
        "200",
    ];
    let a = thermo(&args);
    let b = thermo(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let mut other = args;
    other[1] = "42";
    assert_ne!(thermo(&other).stdout, a.stdout);
}

#[test]
fn seed_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_thermo"))
        .args(["optimize", "--mode", "asymptotic"])
        .env("THERMO_SEED", "17")
        .output()
        .unwrap();
    assert_eq!(json(&out)["provenance"]["seed"], 17);
}

#[test]
fn explicit_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "c.json",
        r#"{"command":"optimize","mode":"two-level","levels":16,"bath":"bosonic","s":2}"#,
    );
    let from_config = json(&thermo(&["--config", config.as_str()]));
    assert_eq!(from_config["n"], 16);
    assert_eq!(from_config["bath"]["bath"], "bosonic");

    let overridden = json(&thermo(&["--config", config.as_str(), "optimize", "--levels", "32"]));
    assert_eq!(overridden["n"], 32);
    assert_eq!(overridden["bath"]["bath"], "bosonic");
}

#[test]
fn simulate_then_estimate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "s.json", r#"{"two_level":{"n":64,"n0":12,"x":2.9682}}"#);
    let stats = dir.path().join("stats.json");
    let stats = stats.to_str().unwrap();
    let sim = thermo(&[
        "--seed",
        "5",
        "--output",
        stats,
        "simulate",
        "--spectrum",
        &spec,
        "--temperature",
        "1",
        "--tau",
        "20000",
        "--stats-only",
    ]);
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    let est = json(&thermo(&[
        "estimate",
        "--stats",
        stats,
        "--levels",
        "64",
        "--n0",
        "12",
        "--epsilon",
        "2.9682",
    ]));
    let t_hat = est["t_hat"].as_f64().unwrap();
    assert!((t_hat - 1.0).abs() < 0.05, "t_hat = {t_hat}");
    assert_eq!(est["valid"], true);
}

#[test]
fn trajectory_file_feeds_the_estimator() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "s.json", r#"{"two_level":{"n":8,"n0":2,"x":2.0}}"#);
    let traj = dir.path().join("t.jsonl");
    let traj = traj.to_str().unwrap();
    let sim = thermo(&[
        "--output",
        traj,
        "simulate",
        "--spectrum",
        &spec,
        "--temperature",
        "1",
        "--tau",
        "2000",
    ]);
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    let est = json(&thermo(&[
        "estimate",
        "--trajectory",
        traj,
        "--levels",
        "8",
        "--n0",
        "2",
        "--epsilon",
        "2.0",
    ]));
    assert!((est["t_hat"].as_f64().unwrap() - 1.0).abs() < 0.3);
}

#[test]
fn no_jump_statistics_are_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let stats = write(dir.path(), "st.json", r#"{"k":0,"l":0,"tau0":3.0,"tau":3.0}"#);
    assert_eq!(thermo(&["estimate", "--stats", &stats]).status.code(), Some(3));
}

#[test]
fn scaling_json_rows() {
    let v = json(&thermo(&[
        "--format", "json", "scaling", "--n-min", "2", "--n-max", "4",
    ]));
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(v["provenance"].is_object());
}
