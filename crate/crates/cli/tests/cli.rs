//! Driver surface: exit codes, artifact layout, override plumbing, and the
//! findings-are-output contract of `check`.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_parinv")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("driver binary should run")
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// A syntactically valid problem file with one unparsable expression.
fn broken_expression_file(dir: &Path) -> PathBuf {
    let path = dir.join("broken.json");
    std::fs::write(
        &path,
        r#"{
  "dim": 1,
  "extents": [1.0],
  "s": 1,
  "source_modes": ["1"],
  "u0": "x +",
  "bc": {"gamma": ["1"]},
  "measurement": {"weights": ["1"]},
  "grid": {"nodes": [5], "t_end": 1.0, "steps": 2}
}"#,
    )
    .unwrap();
    path
}

#[test]
fn check_prints_report_to_stdout_without_out_dir() {
    let cfg = fixture("boundary_data_1d.json");
    let out = run(&["check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&out.stdout).expect("stdout is the JSON report");
    assert_eq!(report["loadable"], true);
    assert!(report["validation"]["violations"].as_array().unwrap().is_empty());
    assert_eq!(report["data_compat_checked"], true);
}

#[test]
fn check_reports_broken_expressions_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = broken_expression_file(dir.path());
    let out = run(&["check", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "findings are check's output, not a failure");
    let report = json_file(&dir.path().join("check.json"));
    assert_eq!(report["loadable"], false);
    let errors = report["load_errors"].as_array().unwrap();
    assert!(
        errors.iter().any(|e| e.as_str().unwrap().contains("u0")),
        "load error should name the offending field: {errors:?}"
    );
}

#[test]
fn unreadable_file_exits_three() {
    let out = run(&["check", "--config", "/nonexistent/problem.json"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn solving_commands_reject_broken_config_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = broken_expression_file(dir.path());
    let out = run(&["invert", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("u0"), "error should name the field: {stderr}");
}

#[test]
fn artifact_commands_require_out_dir() {
    let cfg = fixture("heat_neumann_1d.json");
    let out = run(&["forward", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--out"));
}

#[test]
fn invert_without_any_data_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("mms_forward_1d.json");
    let out = run(&["invert", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("nothing to invert"), "{stderr}");
}

#[test]
fn grid_and_step_overrides_reach_the_echo() {
    let dir = tempfile::tempdir().unwrap();
    // The quadratic fixture stays compatible at any resolution, so the
    // override can coarsen it freely.
    let cfg = fixture("mms_forward_1d.json");
    let out = run(&[
        "forward",
        "--config",
        cfg.to_str().unwrap(),
        "--grid",
        "26",
        "--nt",
        "100",
        "--theta",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json_file(&dir.path().join("forward.json"));
    assert_eq!(report["config"]["grid"]["nodes"], serde_json::json!([26]));
    assert_eq!(report["config"]["grid"]["steps"], 100);
    assert_eq!(report["config"]["solver"]["theta"], 1.0);
}

#[test]
fn rejected_solver_knobs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("heat_neumann_1d.json");
    let out = run(&[
        "forward",
        "--config",
        cfg.to_str().unwrap(),
        "--theta",
        "0.7",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("theta"));
}

#[test]
fn noise_override_needs_a_synth_section() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("heat_neumann_1d.json");
    let out = run(&[
        "forward",
        "--config",
        cfg.to_str().unwrap(),
        "--noise",
        "1e-3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("synth"));
}

#[test]
fn forward_emits_full_state_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("mms_forward_1d.json");
    let out = run(&[
        "forward",
        "--config",
        cfg.to_str().unwrap(),
        "--emit-solution",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    for name in ["u_final.csv", "psi_forward.csv", "u_full.csv", "forward.json"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let full = std::fs::read_to_string(dir.path().join("u_full.csv")).unwrap();
    assert!(full.starts_with("t,x,u"));
    // 51 levels of 51 nodes plus the header.
    assert_eq!(full.lines().count(), 1 + 51 * 51);
}

#[test]
fn synth_writes_series_truth_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("linear_source_1d.json");
    let out = run(&["synth", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let psi = std::fs::read_to_string(dir.path().join("psi_generated.csv")).unwrap();
    assert_eq!(psi.lines().count(), 1 + 401, "one row per time level");
    let truth = std::fs::read_to_string(dir.path().join("q_true.csv")).unwrap();
    assert!(truth.starts_with("t,q_1"));
    let report = json_file(&dir.path().join("synth.json"));
    assert_eq!(report["oversample"], 2);
}

#[test]
fn study_needs_a_refinement_plan() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("linear_source_1d.json");
    let out = run(&["study", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("study"));
}

#[test]
fn study_reports_reconstruction_orders_with_synth() {
    let dir = tempfile::tempdir().unwrap();
    // Small reconstruction study: attach a refinement plan to the
    // measured-data fixture, dropping psi so data comes from synth.
    let mut file: Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("boundary_data_1d.json")).unwrap())
            .unwrap();
    file["measurement"].as_object_mut().unwrap().remove("psi");
    file["synth"] = serde_json::json!({"q_true": ["1 + t"], "oversample": 2});
    file["study"] = serde_json::json!({"levels": 3});
    file["grid"] = serde_json::json!({"nodes": [11], "t_end": 1.0, "steps": 10});
    let cfg = dir.path().join("study.json");
    std::fs::write(&cfg, serde_json::to_string(&file).unwrap()).unwrap();

    let out = run(&["study", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("study.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "level,h,dt,forward_error,forward_order,recon_error,recon_order"
    );
    assert_eq!(lines.count(), 3);
}
