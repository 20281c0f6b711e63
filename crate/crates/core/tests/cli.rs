use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use clustering::diagnostics::CSV_HEADER;
use clustering::output::Snapshot;

const MONOSTABLE: &str = "\
# short monostable run
case = monostable
delta = 0.1
epsilon = 0.01
r = 0
n = 101
dt = 1e-3
t_final = 0.5
sample_every = 10
snapshot_times = 0.25, 0.5
ic = cosine:1.0,0.3,1
";

fn run_cli(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_clustering"))
        .arg("--config")
        .arg(&cfg)
        .arg("--output-dir")
        .arg(dir.join("out"))
        .arg("--quiet")
        .args(extra)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn monostable_run_writes_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_cli(dir.path(), MONOSTABLE, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("out/diag.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    assert_eq!(lines.count(), 51);
    assert!(dir.path().join("out/snapshot_t0.250000.json").exists());
    assert!(dir.path().join("out/snapshot_t0.500000.json").exists());
}

#[test]
fn cfl_violation_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = MONOSTABLE
        .replace("dt = 1e-3", "dt = 0.2")
        .replace("epsilon = 0.01", "epsilon = 0.001")
        .replace("cosine:1.0,0.3,1", "cosine:1.0,0.9,4");
    let o = run_cli(dir.path(), &text, &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("CFL"), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_cli(
        dir.path(),
        &MONOSTABLE.replace("delta = 0.1", "delta = -1"),
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert!(stderr(&o).contains("delta"));

    let o = run_cli(dir.path(), "case = bistable\n", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("a required for bistable"));

    let o = run_cli(dir.path(), MONOSTABLE, &["--set", "colour=blue"]);
    assert_eq!(o.status.code(), Some(2));

    let missing = Command::new(env!("CARGO_BIN_EXE_clustering"))
        .args(["--config", "/nonexistent/run.cfg"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn overrides_and_json_format() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_cli(
        dir.path(),
        MONOSTABLE,
        &["--set", "t_final=0.1", "--format", "json"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("out/diag.json")).unwrap();
    let rows: Vec<serde_json::Value> = serde_json::from_str(&text).unwrap();
    assert_eq!(rows.len(), 11);
    assert_eq!(rows[10]["t"].as_f64(), Some(0.1));
}

#[test]
fn diagnostics_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let text = MONOSTABLE.replace("cosine:1.0,0.3,1", "random:1.0,0.4") + "seed = 11\n";
    for d in [&a, &b] {
        assert_eq!(run_cli(d.path(), &text, &[]).status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("out/diag.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn snapshots_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_cli(dir.path(), MONOSTABLE, &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("out/snapshot_t0.500000.json")).unwrap();
    let snap = Snapshot::parse(&text).unwrap();
    assert_eq!(snap.t, 0.5);
    assert_eq!(snap.x.len(), 101);
    assert_eq!(snap.x[0], -1.0);
    assert_eq!(snap.x[100], 1.0);
    let u = snap.density().unwrap();
    assert!((u.mean() - 1.0).abs() < 1e-12);
    // Re-emitting the parsed snapshot reproduces the file byte for byte.
    assert_eq!(snap.to_json(), text);
}

#[test]
fn steady_state_check() {
    let dir = tempfile::tempdir().unwrap();
    let text = MONOSTABLE
        .replace("case = monostable", "case = steady-state")
        .replace("t_final = 0.5", "t_final = 50");
    let o = run_cli(dir.path(), &text, &["--check"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["pass"], true);
    assert_eq!(summary["converged"], true);

    // Stopping long before the decay completes fails the check.
    let o = run_cli(
        dir.path(),
        &text.replace("t_final = 50", "t_final = 0.2"),
        &["--check"],
    );
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn picard_check_reports_failure_with_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let text = MONOSTABLE
        .replace("case = monostable", "case = picard-check")
        .replace("epsilon = 0.01", "epsilon = 0.1")
        .replace("t_final = 0.5", "t_final = 0.005")
        .replace("dt = 1e-3", "dt = 1e-4");
    let o = run_cli(dir.path(), &text, &["--check"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run_cli(
        dir.path(),
        &(text.clone() + "picard_max_iter = 1\n"),
        &["--check"],
    );
    assert_eq!(o.status.code(), Some(4));
    let o = run_cli(
        dir.path(),
        &text.replace("t_final = 0.005", "t_final = 10"),
        &[],
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("not contracting"));
}

#[test]
fn small_sweep_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let text = MONOSTABLE
        .replace("case = monostable", "case = epsilon-sweep")
        .replace("epsilon = 0.01", "epsilon_list = 0.1, 0.05")
        .replace("t_final = 0.5", "t_final = 0.2");
    let o = run_cli(dir.path(), &text, &["--workers", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("epsilon,error,runtime_seconds"));
    assert_eq!(csv.lines().count(), 3);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["errors"].as_array().unwrap().len(), 2);
}

#[test]
fn limit_and_chemorepulsion_cases() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_cli(
        dir.path(),
        &MONOSTABLE.replace("case = monostable", "case = limit"),
        &["--check"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = MONOSTABLE
        .replace("case = monostable", "case = chemorepulsion-check")
        .replace("epsilon = 0.01", "epsilon = 0.05");
    let o = run_cli(dir.path(), &text, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run_cli(dir.path(), &text.replace("r = 0", "r = 1"), &[]);
    assert_eq!(o.status.code(), Some(2));
}
