//! Binary interface contract: flags, exit codes, and the thread cap.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relevance-lens"))
}

fn run_in(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = bin();
    cmd.current_dir(dir).args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn relevance-lens")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn help_and_version_exit_zero() {
    assert!(bin().arg("--help").output().unwrap().status.success());
    assert!(bin().arg("--version").output().unwrap().status.success());
    let sub = bin().args(["explain", "--help"]).output().unwrap();
    assert!(sub.status.success());
    let text = String::from_utf8_lossy(&sub.stdout).into_owned();
    for flag in ["--config", "--out", "--seed", "--folds", "--class"] {
        assert!(text.contains(flag), "explain --help misses {flag}");
    }
}

#[test]
fn missing_required_flag_exits_two() {
    let out = bin().arg("explain").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_problems_exit_two() {
    let dir = tempfile::tempdir().unwrap();

    let out = run_in(dir.path(), &["analyze", "--config", "nope.json"], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("config error"), "stderr: {}", stderr(&out));

    fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
    let out = run_in(dir.path(), &["analyze", "--config", "bad.json"], &[]);
    assert_eq!(out.status.code(), Some(2));

    fs::write(dir.path().join("unknown.json"), r#"{"no_such_key": 1}"#).unwrap();
    let out = run_in(dir.path(), &["analyze", "--config", "unknown.json"], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_data_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("config.json"), "{}").unwrap();
    let out = run_in(
        dir.path(),
        &["render", "--config", "config.json", "--input", "missing.rlnr"],
        &[],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("data error"), "stderr: {}", stderr(&out));
}

#[test]
fn thread_cap_env_var_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("config.json"), "{}").unwrap();
    let args = ["render", "--config", "config.json", "--input", "missing.rlnr"];

    // A valid cap is accepted; the command proceeds to its usual failure.
    let out = run_in(dir.path(), &args, &[("RELEVANCE_LENS_THREADS", "2")]);
    assert_eq!(out.status.code(), Some(3));

    // Garbage is rejected up front as a config error.
    for bad in ["zero", "0", "-3", ""] {
        let out = run_in(dir.path(), &args, &[("RELEVANCE_LENS_THREADS", bad)]);
        assert_eq!(out.status.code(), Some(2), "RELEVANCE_LENS_THREADS={bad:?}");
        assert!(stderr(&out).contains("RELEVANCE_LENS_THREADS"));
    }
}
