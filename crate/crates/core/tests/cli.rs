use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_morse-entropy"));
    c.env_remove("MORSE_ENTROPY_WORKERS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_str(String::from_utf8_lossy(&out.stderr).lines().last().unwrap()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn critpoints_and_euler_curve() {
    let dir = tempfile::tempdir().unwrap();
    let cat = dir.path().join("c.json");
    let args = ["critpoints", "--model", "double_well", "--N", "3", "--vmax", "0.1", "--seed", "7", "-o", path_str(&cat)];
    assert!(run(&args).status.success());
    let first = std::fs::read(&cat).unwrap();
    let doc: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(doc["result"]["points"].as_array().unwrap().len(), 27);
    assert_eq!(doc["seed"], 7);
    assert_eq!(doc["config_hash"].as_str().unwrap().len(), 64);

    assert!(run(&args).status.success());
    assert_eq!(std::fs::read(&cat).unwrap(), first, "rerun must reproduce the file");

    let out = run(&["euler-curve", "--catalog", path_str(&cat), "--vmin", "-1", "--vmax", "0.5", "--steps", "64"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("# morse-entropy") && header.contains("config_hash=") && header.contains("schema=euler-curve/v1"));
    assert_eq!(lines.next().unwrap(), "v,vbar,covered,chi,mu_0,mu_1,mu_2,mu_3");
    let mut chi: Vec<String> = lines.map(|l| l.split(',').nth(3).unwrap().to_string()).collect();
    chi.dedup();
    assert_eq!(chi, ["0", "8", "-4", "2", "1", ""]);
}

#[test]
fn volume_of_the_unit_ball() {
    let out = run(&["volume", "--model", "harmonic", "--N", "4", "--v", "1", "--samples", "1000000", "--seed", "1"]);
    let r = &stdout_json(&out)["result"];
    let (mean, se) = (r["mean"].as_f64().unwrap(), r["stderr"].as_f64().unwrap());
    assert!((mean - std::f64::consts::PI.powi(2) / 2.0).abs() < 3.0 * se);
    assert_eq!(r["estimator"], "hit_or_miss");
    assert_eq!(r["model_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn job_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let job = dir.path().join("job.json");
    std::fs::write(&job, r#"{"model": {"kind": "harmonic", "N": 2}, "v": 4.0, "estimator": "analytic", "seed": 5}"#).unwrap();
    let doc = stdout_json(&run(&["volume", "--config", path_str(&job), "--v", "1"]));
    assert!((doc["result"]["mean"].as_f64().unwrap() - std::f64::consts::PI).abs() < 1e-12);
    assert_eq!(doc["seed"], 5);
    assert_eq!(doc["config"]["v"], 1.0);

    std::fs::write(&job, r#"{"model": {"kind": "harmonic", "N": 2}, "vv": 1.0}"#).unwrap();
    let out = run(&["volume", "--config", path_str(&job)]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "ConfigError");
    assert_eq!(err["exit_code"], 2);
}

#[test]
fn exit_codes() {
    let out = run(&["volume", "--model", "harmonic", "--N", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "ConfigError");

    let out = run(&["euler-curve", "--catalog", "/nonexistent/c.json", "--vmin", "0", "--vmax", "1"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(stderr_json(&out)["error"], "IoError");

    let out = run(&["verify-decomposition", "--model", "harmonic", "--N", "2", "--v", "1", "--samples", "1000"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "SingleLevel");

    let out = run(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn worker_count_does_not_change_output() {
    let args = ["volume", "--model", "double_well", "--N", "3", "--v", "0.1", "--samples", "200000", "--seed", "3"];
    let a = bin().args(args).env("MORSE_ENTROPY_WORKERS", "1").output().unwrap();
    let b = bin().args(args).env("MORSE_ENTROPY_WORKERS", "4").output().unwrap();
    let c = bin().args(args).args(["--workers", "2"]).output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn entropy_scan_csv() {
    let out = run(&[
        "entropy-scan", "--model", "harmonic", "--N", "2", "--box", "-3,3", "--vmin", "0.5", "--vmax", "1.5", "--steps", "10",
        "--estimator", "analytic",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].contains("schema=entropy-curve/v1"));
    assert_eq!(lines[1], "vbar,S,stderr_S,dS1,dS2,dS3,dS4,in_band");
    assert_eq!(lines.len(), 2 + 11);
    let row: Vec<&str> = lines[2 + 5].split(',').collect();
    assert!((row[0].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
    assert!((row[3].parse::<f64>().unwrap() - 0.5).abs() < 1e-2);
}

#[test]
fn scaling_and_coeffs() {
    let doc = stdout_json(&run(&[
        "scaling", "--model", "harmonic", "--box", "-5,5", "--N-list", "2,4,8", "--estimator", "analytic", "--steps", "20",
    ]));
    let verdicts = doc["result"]["verdicts"].as_array().unwrap();
    assert!(verdicts.iter().all(|v| v["verdict"] == "no_growth"));

    let doc = stdout_json(&run(&["coeffs", "--N", "4", "--eps0", "0.1", "--r", "1"]));
    let a = doc["result"]["A"].as_array().unwrap();
    assert_eq!(a.len(), 5);
    assert!((a[2]["A"].as_f64().unwrap() - 1.925395017095757).abs() < 1e-10);
}

#[test]
fn decomposition_report() {
    let doc = stdout_json(&run(&[
        "verify-decomposition", "--model", "double_well", "--N", "2", "--v", "0.2", "--eps-list", "0.1,0.05", "--r", "1",
        "--samples", "400000", "--seed", "2",
    ]));
    let table = doc["result"]["table"].as_array().unwrap();
    assert_eq!(table.len(), 2);
    let r: Vec<f64> = table.iter().map(|t| t["residual_rel"].as_f64().unwrap()).collect();
    assert!(r[1] < r[0], "{r:?}");
}
