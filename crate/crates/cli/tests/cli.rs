use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nvpd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvpd")).args(args).current_dir(cwd).output().expect("run nvpd")
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn simulate_then_fit_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nvpd(&["simulate", "trace", "--preset", "fig1b", "--out", "sim"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    fs::write(tmp.path().join("fit.json"), r#"{"version": 1, "input": "sim/trace.csv"}"#).unwrap();
    let out = nvpd(&["fit", "trace-hmm", "--config", "fit.json", "--out", "fit"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let report = json(&tmp.path().join("fit/trace_hmm_report.json"));
    let derived = &report["report"]["derived"];
    assert!((derived["T_minus_ms"].as_f64().unwrap() / 56.6 - 1.0).abs() < 0.15);
    assert!((derived["T_zero_ms"].as_f64().unwrap() / 465.0 - 1.0).abs() < 0.15);
    assert!(report["extra"]["path_agreement"].as_f64().unwrap() > 0.99);
    assert!(tmp.path().join("fit/manifest.json").exists());
}

#[test]
fn manifest_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(nvpd(&["simulate", "histogram", "--preset", "fig5b", "--seed", "9", "--out", "a"], tmp.path()).status.success());
    let out = nvpd(&["simulate", "histogram", "--config", "a/manifest.json", "--out", "b"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(tmp.path().join("a/histogram.csv")).unwrap(), fs::read(tmp.path().join("b/histogram.csv")).unwrap());
    let (a, b) = (json(&tmp.path().join("a/manifest.json")), json(&tmp.path().join("b/manifest.json")));
    assert_eq!(a["config_sha256"], b["config_sha256"]);
    assert_eq!(b["seed"], 9);
}

#[test]
fn replicate_sweep_is_distinct_and_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/sweep_trace.json");
    for dir in ["a", "b"] {
        assert!(nvpd(&["simulate", "trace", "--config", cfg, "--out", dir], tmp.path()).status.success());
    }
    let read = |dir: &str, i: usize| fs::read(tmp.path().join(dir).join(format!("trace_{i:03}.csv"))).unwrap();
    for i in 0..5 {
        assert_eq!(read("a", i), read("b", i));
        for j in 0..i {
            assert_ne!(read("a", i), read("a", j));
        }
    }
}

#[test]
fn zero_rate_preset_never_leaves_initial_state() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(nvpd(&["simulate", "trace", "--preset", "zero-rate", "--out", "z"], tmp.path()).status.success());
    let text = fs::read_to_string(tmp.path().join("z/trace.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("bin_ms,counts,true_state"));
    assert!(lines.all(|l| l.ends_with(",NV-")));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nvpd(&["fit", "histogram", "--config", "missing.json"], tmp.path());
    assert_eq!(out.status.code(), Some(4));

    fs::write(tmp.path().join("bad.json"), r#"{"version": 1, "input": "x.csv", "colour": 1}"#).unwrap();
    let out = nvpd(&["fit", "trace-hmm", "--config", "bad.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));

    fs::write(tmp.path().join("v.json"), r#"{"version": 99, "input": "x.csv"}"#).unwrap();
    let out = nvpd(&["fit", "trace-hmm", "--config", "v.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));

    assert!(nvpd(&["simulate", "trace", "--preset", "fig1b", "--out", "sim"], tmp.path()).status.success());
    fs::write(tmp.path().join("short.json"), r#"{"version": 1, "input": "sim/trace.csv", "max_iterations": 1}"#).unwrap();
    let out = nvpd(&["fit", "trace-hmm", "--config", "short.json", "--out", "fit"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(tmp.path().join("fit/trace_hmm_report.json").exists());
}
