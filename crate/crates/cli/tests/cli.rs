use std::path::Path;
use std::process::{Command, Output};

use bl_lab::exact_solution;
use bl_lab::report::read_trajectory_csv;
use serde_json::Value;

fn bl_lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bl-lab"))
        .args(args)
        .current_dir(dir)
        .env_remove("BL_LAB_THREADS")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn integrate_exact_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = bl_lab(
        dir.path(),
        &[
            "integrate",
            "--beta",
            "-1",
            "--exact",
            "--t0",
            "1",
            "--t-end",
            "100",
            "--out",
            "traj.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let tr = read_trajectory_csv(&dir.path().join("traj.csv")).unwrap();
    assert_eq!(tr.last().t, 100.0);
    for s in tr.samples() {
        let e = exact_solution(s.t, -1.0, 0.0).unwrap();
        assert!((s.f - e.f).abs() <= 1e-8, "t = {}", s.t);
    }
}

#[test]
fn integrate_without_initial_state_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let out = bl_lab(dir.path(), &["integrate", "--beta", "-1", "--out", "t.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("t.csv").exists());
}

#[test]
fn bad_flag_value_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bl_lab(dir.path(), &["shoot", "--beta", "x"]).status.code(), Some(2));
    assert_eq!(
        bl_lab(dir.path(), &["shoot", "--beta", "-1", "--family", "wall"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn nonnegative_beta_shoot_fails_with_reason() {
    let dir = tempfile::tempdir().unwrap();
    let out = bl_lab(dir.path(), &["shoot", "--beta", "0.5", "--target", "unbounded"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("every solution with f'(inf) = 0 is bounded"), "{err}");
}

#[test]
fn shoot_writes_report_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.json", "b.json"] {
        let out = bl_lab(dir.path(), &["shoot", "--beta", "-1", "--out", name]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (a, b) = (
        std::fs::read(dir.path().join("a.json")).unwrap(),
        std::fs::read(dir.path().join("b.json")).unwrap(),
    );
    assert_eq!(a, b);
    let v = json(&dir.path().join("a.json"));
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    assert_eq!(
        keys,
        [
            "a",
            "beta",
            "bracket",
            "class",
            "f_end",
            "family",
            "fp_end",
            "iterations",
            "residual_bc",
            "t_end",
            "value"
        ]
    );
    assert_eq!(v["class"], "UnboundedPositive");
}

#[test]
fn shoot_without_bracket_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = bl_lab(dir.path(), &["shoot", "--beta", "-1", "--family", "flux", "--a", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn empty_sweep_gives_empty_array() {
    let dir = tempfile::tempdir().unwrap();
    let out = bl_lab(
        dir.path(),
        &["sweep", "--a=", "--beta=-1", "--out", "s.json", "--csv", "s.csv"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&dir.path().join("s.json")), Value::Array(vec![]));
    assert_eq!(
        std::fs::read_to_string(dir.path().join("s.csv")).unwrap(),
        "a,beta,value,class\n"
    );
}

#[test]
fn sweep_output_does_not_depend_on_threads() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        [
            "sweep", "--family", "flux", "--a", "0,1", "--beta", "-1,0.5", "--out", out,
        ]
    };
    let one = Command::new(env!("CARGO_BIN_EXE_bl-lab"))
        .args(args("one.json"))
        .current_dir(dir.path())
        .env("BL_LAB_THREADS", "1")
        .status()
        .unwrap();
    assert!(one.success());
    assert!(bl_lab(dir.path(), &args("many.json")).status.success());
    let a = std::fs::read(dir.path().join("one.json")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("many.json")).unwrap());
    let cells = json(&dir.path().join("one.json"));
    assert_eq!(cells.as_array().unwrap().len(), 4);
    assert_eq!(cells[2]["class"], "UnboundedPositive");
    assert_eq!(cells[1]["error"], "PreconditionRejected");
}

#[test]
fn bad_thread_count_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_bl-lab"))
        .args(["sweep", "--a", "0", "--beta", "-1", "--out", "s.json"])
        .current_dir(dir.path())
        .env("BL_LAB_THREADS", "zero")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn fit_report_from_trajectory_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = bl_lab(
        dir.path(),
        &["shoot", "--beta", "-1", "--out", "r.json", "--trajectory", "t.csv"],
    );
    assert!(out.status.success());
    let out = bl_lab(
        dir.path(),
        &["fit", "--beta", "-1", "--input", "t.csv", "--out", "fit.json"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&dir.path().join("fit.json"));
    assert_eq!(v["p_theory"], 0.5);
    assert!(v["energy_drift"]["max_drift"].as_f64().unwrap() < 1e-7);
}

#[test]
fn fit_on_malformed_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "t,f,fp\n0,1,2\n").unwrap();
    let out = bl_lab(dir.path(), &["fit", "--beta", "-1", "--input", "bad.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn phase_report_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = bl_lab(
        dir.path(),
        &[
            "phase",
            "--beta",
            "-1",
            "--out",
            "eq.json",
            "--field",
            "field.csv",
            "--grid",
            "5",
            "--orbit",
            "0.1",
            "-0.1",
            "--t-max",
            "5",
            "--phase-out",
            "orbit.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&dir.path().join("eq.json"));
    let points = v["points"].as_array().unwrap();
    assert!(points.iter().any(|p| p["u"] == -0.5 && p["v"] == 0.5), "{v}");
    assert!(points.iter().any(|p| p["u"] == 0.0 && p["class"] == "SaddleNode"));
    let field = std::fs::read_to_string(dir.path().join("field.csv")).unwrap();
    assert_eq!(field.lines().count(), 26);
    assert!(std::fs::read_to_string(dir.path().join("orbit.csv"))
        .unwrap()
        .starts_with("s,u,v\n"));
}

#[test]
fn phase_out_needs_a_source() {
    let dir = tempfile::tempdir().unwrap();
    let out = bl_lab(dir.path(), &["phase", "--beta", "-1", "--phase-out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_quick_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = bl_lab(dir.path(), &["verify", "--quick"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.contains("PASS criterion  1"));
    assert!(!text.contains("FAIL"));
}
