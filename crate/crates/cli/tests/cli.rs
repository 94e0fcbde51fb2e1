use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn adslab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adslab"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn with_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn params_reports_and_rejects_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = adslab(dir.path(), &["params"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = read_json(&dir.path().join("params.json"));
    assert_eq!(doc["command"], "params");
    let dp = doc["result"]["delta_plus"].as_f64().unwrap();
    assert!((dp - (0.5 + (0.25f64 + 6.25).sqrt())).abs() < 1e-14);

    // m² = −d²/4 sits on the bound
    let cfg = with_config(dir.path(), "d = 2\nm2 = -1.0\n");
    assert_eq!(adslab(dir.path(), &["--config", &cfg, "params"]).status.code(), Some(2));
}

#[test]
fn splitting_check_default() {
    let dir = tempfile::tempdir().unwrap();
    let out = adslab(dir.path(), &["splitting-check"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&dir.path().join("splitting-check.json"));
    assert!(doc["result"]["max_relative_residual"].as_f64().unwrap() < 1e-4);
    let csv = std::fs::read_to_string(dir.path().join("splitting.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn same_seed_same_output() {
    let runs: Vec<Value> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let out = adslab(dir.path(), &["--seed", "11", "functional"]);
            assert_eq!(out.status.code(), Some(0));
            let mut doc = read_json(&dir.path().join("functional.json"));
            doc.as_object_mut().unwrap().remove("timestamp");
            doc
        })
        .collect();
    assert_eq!(runs[0]["config"]["seed"], 11);
    assert_eq!(serde_json::to_string(&runs[0]).unwrap(), serde_json::to_string(&runs[1]).unwrap());
}

#[test]
fn thread_count_does_not_change_results() {
    let run = |threads: &str| {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(adslab(dir.path(), &["--threads", threads, "conditioning-check"]).status.code(), Some(0));
        let mut doc = read_json(&dir.path().join("conditioning-check.json"));
        doc.as_object_mut().unwrap().remove("timestamp");
        doc
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_config(dir.path(), "d = 1\nmass = 3.0\n");
    let out = adslab(dir.path(), &["--config", &cfg, "params"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mass"));
    let cfg = with_config(dir.path(), "d = \"one\"\n");
    assert_eq!(adslab(dir.path(), &["--config", &cfg, "params"]).status.code(), Some(2));
    assert_eq!(adslab(dir.path(), &["--config", "/nonexistent.toml", "params"]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(adslab(dir.path(), &["no-such-command"]).status.code(), Some(1));
    assert_eq!(adslab(dir.path(), &["--threads", "0", "params"]).status.code(), Some(1));
    assert_eq!(adslab(dir.path(), &["--seed", "x", "params"]).status.code(), Some(1));
    assert_eq!(adslab(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn failed_check_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_config(dir.path(), "z = 1e-1\ntolerance = 1e-9\n");
    let out = adslab(dir.path(), &["--config", &cfg, "corr-check"]);
    assert_eq!(out.status.code(), Some(3));
    // the outputs are still written
    assert_eq!(read_json(&dir.path().join("corr-check.json"))["pass"], false);
}

#[test]
fn budget_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_config(dir.path(), "n_bulk = 5\n");
    assert_eq!(adslab(dir.path(), &["--config", &cfg, "conditioning-check"]).status.code(), Some(4));
}
