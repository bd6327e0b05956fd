//! End-to-end behaviour of the `canonoid` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs").join(name)
}

fn canonoid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_canonoid")).args(args).output().expect("binary runs")
}

fn run_in(sub: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    canonoid(&args)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn check<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["checks"].as_array().unwrap().iter().find(|c| c["check"] == name).unwrap()
}

#[test]
fn identity_config_passes_everything() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in("run", &config("identity.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["verdict"], "pass");
    let checks = report["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 7);
    for c in checks {
        assert_eq!(c["verdict"], "pass", "{c}");
        if c["check"] != "traces" {
            assert!(c["residual"].as_f64().unwrap() < 1e-12, "{c}");
        }
    }
}

#[test]
fn free_particle_run_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in("run", &config("free_particle.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(check(&report, "canonoid")["verdict"], "pass");
    let traces = check(&report, "traces");
    assert_eq!(traces["verdict"], "pass");
    assert!(traces["residual"].as_f64().unwrap() < 1e-7);
}

#[test]
fn negative_control_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in("run", &config("negative_control.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(check(&report, "canonoid")["verdict"], "fail");
    assert_eq!(check(&report, "traces")["verdict"], "not_applicable");
    assert!(check(&report, "traces")["residual"].as_f64().unwrap() > 0.1);
}

#[test]
fn missing_sample_box_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = read_json(&config("free_particle.json"));
    v.as_object_mut().unwrap().remove("sample_box");
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, v.to_string()).unwrap();
    let out = run_in("check", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sample_box"));
    assert_eq!(canonoid(&["check", "--config", "/nonexistent/x.json"]).status.code(), Some(2));
}

#[test]
fn invariants_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in("invariants", &config("free_particle.json"), dir.path(), &["--kmax", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("invariants.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("time,trS1,trS2,trS3,trS4"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    // p = 1.3 on the trajectory: tr S^k = 2 p^(2k)
    for (k, v) in first.iter().enumerate().skip(1) {
        assert!((v - 2.0 * 1.3f64.powi(2 * k as i32)).abs() < 1e-12);
    }
    assert_eq!(csv.lines().count(), 10_002);
}

#[test]
fn rotation_is_canonical() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in("check", &config("rotation.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("canonical: pass"));
}

#[test]
fn contact_scaling_check_reports_k() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in("check", &config("contact_scaling.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let report = read_json(&dir.path().join("check.json"));
    assert_eq!(check(&report, "canonical")["verdict"], "fail");
    let canonoid = check(&report, "canonoid");
    assert_eq!(canonoid["verdict"], "pass");
    let probe = canonoid["details"]["k_probe"].as_array().unwrap();
    assert!(!probe.is_empty());
    for p in probe {
        let (k, h) = (p["K"].as_f64().unwrap(), p["H"].as_f64().unwrap());
        assert!((k - 2.0 * h).abs() < 1e-12);
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        run_in("run", &config("cocontact_scaling.json"), dir.path(), &[]);
    }
    for file in ["report.json", "trajectory.csv", "invariants.csv"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file}");
    }
    assert!(a.path().join("report.meta.json").exists());
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    run_in("check", &config("rotation.json"), dir.path(), &["--seed", "99", "--tol", "1e-3", "--kmax", "2"]);
    let report = read_json(&dir.path().join("check.json"));
    assert_eq!(report["provenance"]["seed"], 99);
    assert_eq!(report["provenance"]["kmax"], 2);
    assert_eq!(check(&report, "canonical")["tolerance"], 1e-3);
    let out = run_in("check", &config("rotation.json"), dir.path(), &["--kmax", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_merges_previous_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("free_particle.json");
    for sub in ["check", "integrate", "invariants"] {
        assert_eq!(run_in(sub, &cfg, dir.path(), &[]).status.code(), Some(0), "{sub}");
    }
    let out = canonoid(&["report", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let merged = read_json(&dir.path().join("report.json"));
    let names: Vec<&str> = merged["checks"].as_array().unwrap().iter().map(|c| c["check"].as_str().unwrap()).collect();
    assert_eq!(names, ["canonoid", "traces", "torsion", "lenard", "involution", "lie_derivative"]);
    assert_eq!(merged["command"], "report");

    let other = run_in("check", &config("rotation.json"), dir.path(), &[]);
    assert_eq!(other.status.code(), Some(0));
    let out = canonoid(&["report", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "mixed configurations are rejected");

    let empty = tempfile::tempdir().unwrap();
    assert_eq!(canonoid(&["report", "--out", empty.path().to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn integrate_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in("integrate", &config("damped_oscillator.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("time,q1,p1,z,H\n"));
}
