//! Runs the `photonweave` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_photonweave")).args(args).output().expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    let out = run(&["zero-mode", "--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("analytic_intensity"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&["no-such-scenario"]), 1);
    assert_eq!(code(&["hom", "--bogus"]), 1);
    assert_eq!(code(&[]), 1);
}

#[test]
fn writes_artifacts_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(code(&["hom", "--out", path(out)]), 0);
    }
    let csv = std::fs::read(a.join("results.csv")).unwrap();
    assert_eq!(csv, std::fs::read(b.join("results.csv")).unwrap());
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("tau,P11_boson,P11_fermion,P11_classical\n"));
    assert_eq!(text.lines().count(), 202);
    assert!(std::fs::read_to_string(a.join("plot.svg")).unwrap().starts_with("<svg"));
    let run: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["scenario"], "hom");
    assert_eq!(run["config"]["params"]["points"], 201);
}

#[test]
fn seeded_runs_repeat_and_seeds_matter() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"version": 1, "params": {"trials": 3}}"#).unwrap();
    let csv = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        assert_eq!(code(&["characterize", "--config", path(&cfg), "--seed", seed, "--out", path(&out)]), 0);
        std::fs::read(out.join("results.csv")).unwrap()
    };
    let (a, b, c) = (csv("a", "5"), csv("b", "5"), csv("c", "6"));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn printed_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["triad-sweep", "--print-config"]);
    assert_eq!(out.status.code(), Some(0));
    let cfg = dir.path().join("triad.json");
    std::fs::write(&cfg, &out.stdout).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&["triad-sweep", "--config", path(&cfg), "--out", path(&a)]), 0);
    assert_eq!(code(&["triad-sweep", "--out", path(&b)]), 0);
    assert_eq!(std::fs::read(a.join("results.csv")).unwrap(), std::fs::read(b.join("results.csv")).unwrap());
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    };
    let out = dir.path().join("out");
    let cases = [
        write("unknown_top.json", r#"{"version": 1, "colour": "red"}"#),
        write("unknown_param.json", r#"{"version": 1, "params": {"sigmaa": 2.0}}"#),
        write("version.json", r#"{"version": 99}"#),
        write("wrong_scenario.json", r#"{"version": 1, "scenario": "ghz"}"#),
        write("not_json.json", "version = 1"),
        write("bad_value.json", r#"{"version": 1, "params": {"sigma": -1.0}}"#),
    ];
    for cfg in &cases {
        assert_eq!(code(&["hom", "--config", path(cfg), "--out", path(&out)]), 1, "{}", cfg.display());
    }
    assert_eq!(code(&["hom", "--config", path(&dir.path().join("missing.json"))]), 1);
    assert!(!out.exists(), "config errors must not leave artifacts");
}

#[test]
fn preset_errors_exit_one() {
    assert_eq!(code(&["zero-mode", "--preset", "no-such-lattice"]), 1);
    assert_eq!(code(&["hom", "--preset", "small-432"]), 1);
}

#[test]
fn lattice_scenario_with_small_preset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("spec");
    assert_eq!(code(&["lattice-spectrum", "--preset", "small-432", "--threads", "2", "--out", path(&out)]), 0);
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 433);
    assert!(out.join("dos.csv").exists());
}

#[test]
fn validate_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let cfg = dir.path().join("v.json");
    std::fs::write(&cfg, r#"{"version": 1, "params": {"oracle_configurations": 40}}"#).unwrap();
    assert_eq!(code(&["validate", "--config", path(&cfg), "--out", path(&out)]), 0);
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")), "{csv}");
}
