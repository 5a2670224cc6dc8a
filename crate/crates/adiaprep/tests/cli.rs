//! End-to-end runs of the `adiaprep` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn adiaprep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adiaprep"))
        .args(args)
        .env_remove("ADIAPREP_OUT")
        .env_remove("ADIAPREP_JOBS")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_manifest(dir: &Path, body: &str) -> String {
    let path = dir.join("manifest.json");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn without_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timing");
    v
}

const SMALL: &str = r#"{"id":"small","family":"mps-family:g=-0.6","n_qubits":[8,12],"total_times":[2.0,4.0]}"#;

#[test]
fn prepare_writes_records_for_a_long_chain() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(
        dir.path(),
        r#"{"id":"smoke","family":"mps-family:g=-0.6","n_qubits":[32],"total_times":[10.0]}"#,
    );
    let out_dir = dir.path().join("out");
    let summary = stdout_json(&adiaprep(&["prepare", "--manifest", &m, "--out", out_dir.to_str().unwrap()]));
    assert_eq!(summary["cells"].as_array().unwrap().len(), 1);
    let record = read_json(&out_dir.join("smoke_N32_T10.json"));
    let f = record["summary"]["final_fidelity"].as_f64().unwrap();
    assert!(f > 0.0 && f <= 1.0, "F = {f}");
    assert_eq!(record["n_pairs"], 16);
    assert_eq!(record["manifest_hash"], summary["manifest_hash"]);
    let csv = std::fs::read_to_string(out_dir.join("smoke_N32_T10.csv")).unwrap();
    let hash = summary["manifest_hash"].as_str().unwrap();
    assert!(csv.lines().next().unwrap().ends_with(&format!("manifest={hash}")));
    assert!(out_dir.join("smoke_summary.json").exists());
}

#[test]
fn empty_time_list_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(
        dir.path(),
        r#"{"id":"bad","family":"mps-family:g=-0.6","n_qubits":[8],"total_times":[]}"#,
    );
    let out = adiaprep(&["prepare", "--manifest", &m, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("bad_summary.json").exists());
}

#[test]
fn unknown_manifest_field_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(
        dir.path(),
        r#"{"id":"x","family":"aklt-1d","n_qubits":[8],"total_times":[1.0],"colour":1}"#,
    );
    assert_eq!(adiaprep(&["prepare", "--manifest", &m]).status.code(), Some(2));
}

#[test]
fn rerun_and_parallel_run_reproduce_records() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), SMALL);
    let runs = ["a", "b", "c"].map(|name| dir.path().join(name));
    for (run, jobs) in runs.iter().zip(["1", "1", "3"]) {
        stdout_json(&adiaprep(&["prepare", "--manifest", &m, "--out", run.to_str().unwrap(), "--jobs", jobs]));
    }
    for stem in ["small_N8_T2", "small_N8_T4", "small_N12_T2", "small_N12_T4"] {
        let base = without_timing(read_json(&runs[0].join(format!("{stem}.json"))));
        for other in &runs[1..] {
            assert_eq!(base, without_timing(read_json(&other.join(format!("{stem}.json")))), "{stem}");
            let a = std::fs::read(runs[0].join(format!("{stem}.csv"))).unwrap();
            assert_eq!(a, std::fs::read(other.join(format!("{stem}.csv"))).unwrap(), "{stem}");
        }
    }
    let summary = |r: &Path| read_json(&r.join("small_summary.json"));
    assert_eq!(summary(&runs[0]), summary(&runs[2]));
}

#[test]
fn ed_evolve_agrees_with_prepare_on_a_small_chain() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(
        dir.path(),
        r#"{"id":"cmp","family":"mps-family:g=-0.6","n_qubits":[8],"total_times":[4.0],
            "trotter_step":0.01,"ed_step":0.01,"cutoff":0.0,"max_bond":1000}"#,
    );
    let out = dir.path().to_str().unwrap();
    stdout_json(&adiaprep(&["prepare", "--manifest", &m, "--out", out]));
    stdout_json(&adiaprep(&["ed-evolve", "--manifest", &m, "--out", out]));
    let f = |name: &str| read_json(&dir.path().join(name))["summary"]["final_fidelity"].as_f64().unwrap();
    let (tebd, ed) = (f("cmp_N8_T4.json"), f("cmp_N8_T4_ed.json"));
    assert!((tebd - ed).abs() < 1e-4, "{tebd} vs {ed}");
}

#[test]
fn fit_reads_records_and_rejects_missing_input() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(
        dir.path(),
        r#"{"id":"f","family":"mps-family:g=-0.6","n_qubits":[8,12,16],"total_times":[2.0,4.0]}"#,
    );
    let out = dir.path().join("runs");
    stdout_json(&adiaprep(&["prepare", "--manifest", &m, "--out", out.to_str().unwrap()]));
    let glob = format!("{}/f_N*.json", out.display());
    let fit = stdout_json(&adiaprep(&["fit", "--input", &glob, "--model", "error-density"]));
    assert_eq!(fit["inputs"].as_array().unwrap().len(), 6);
    let missing = format!("{}/nothing_*.json", out.display());
    let code = adiaprep(&["fit", "--input", &missing, "--model", "error-density"]).status.code();
    assert_eq!(code, Some(2));
}

#[test]
fn tampered_trajectory_is_rejected_by_fit() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(
        dir.path(),
        r#"{"id":"t","family":"mps-family:g=-0.6","n_qubits":[8],"total_times":[2.0]}"#,
    );
    let out = dir.path().join("runs");
    stdout_json(&adiaprep(&["prepare", "--manifest", &m, "--out", out.to_str().unwrap()]));
    let csv = out.join("t_N8_T2.csv");
    let text = std::fs::read_to_string(&csv).unwrap().replacen("manifest=", "manifest=0", 1);
    std::fs::write(&csv, text).unwrap();
    let glob = format!("{}/t_N*.json", out.display());
    assert_eq!(adiaprep(&["fit", "--input", &glob, "--model", "error-density"]).status.code(), Some(2));
}

#[test]
fn schedule_samples_cover_the_unit_interval() {
    let v = stdout_json(&adiaprep(&["schedule", "--kind", "beta", "--k", "2", "--samples", "11"]));
    let samples = v["samples"].as_array().unwrap();
    assert_eq!(samples.len(), 11);
    assert_eq!(samples[0]["s"].as_f64().unwrap(), 0.0);
    assert!((samples[10]["s"].as_f64().unwrap() - 1.0).abs() < 1e-15);
    assert!((samples[5]["s"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(adiaprep(&["schedule", "--kind", "beta"]).status.code(), Some(1));
    assert_eq!(adiaprep(&["schedule", "--kind", "sin2-1d", "--samples", "1"]).status.code(), Some(1));
}

#[test]
fn state_reports_closed_form_correlation_length() {
    let v = stdout_json(&adiaprep(&["state", "--family", "mps-family:g=-0.5", "--n", "8"]));
    let xi = v["correlation_length_per_qubit"].as_f64().unwrap();
    assert!((xi - 1.0 / 3f64.ln()).abs() < 1e-10);
    assert!(v["energy"].as_f64().unwrap().abs() < 1e-10);
    assert_eq!(adiaprep(&["state", "--family", "aklt-1d", "--n", "8", "--s", "2"]).status.code(), Some(1));
}

#[test]
fn gap_command_writes_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&adiaprep(&[
        "gap", "--family", "mps-family:g=-0.3", "--sizes", "8", "--grid", "5", "--out",
        dir.path().to_str().unwrap(),
    ]));
    let p = &v["profiles"][0];
    assert!(p["delta_min"].as_f64().unwrap() > 0.0);
    let csv = std::fs::read_to_string(dir.path().join(p["file"].as_str().unwrap())).unwrap();
    assert!(csv.starts_with("# adiaprep"));
    assert_eq!(csv.lines().count(), 2 + 5);
    assert_eq!(adiaprep(&["gap", "--family", "aklt-1d", "--sizes", "8", "--grid", "1:0:3"]).status.code(), Some(1));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(adiaprep(&["prepare"]).status.code(), Some(1));
    assert_eq!(adiaprep(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(adiaprep(&["--help"]).status.code(), Some(0));
    assert_eq!(adiaprep(&["--version"]).status.code(), Some(0));
}
