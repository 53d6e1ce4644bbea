use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_balanced-news"))
}

fn manifest(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn ingest_prints_one_summary_line() {
    let out = bin()
        .args(["ingest", "--corpus"])
        .arg(manifest("tests/fixtures/ingest_corpus.jsonl"))
        .arg("--bias-map")
        .arg(manifest("tests/fixtures/bias_map.csv"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), "loaded=13 classified=7 skipped_unmapped=2 skipped_malformed=4\n");
    assert!(stderr(&out).contains("line 4"));
}

#[test]
fn simulate_writes_rows_and_prints_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("fig3.csv");
    let out = bin()
        .args(["simulate", "--scenario", "fig3", "--seed", "0", "--out"])
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("iterations=5 "));
    let csv = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,pct_lib_unfiltered,pct_lib_balanced,lower,upper,clicked_type"));
    assert_eq!(lines.count(), 6);

    let jsonl_path = dir.path().join("long.jsonl");
    let out = bin()
        .args(["simulate", "--scenario", "fig3", "--iterations", "12", "--format", "jsonl", "--out"])
        .arg(&jsonl_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(std::fs::read_to_string(&jsonl_path).unwrap().lines().count(), 13);
}

#[test]
fn failures_exit_nonzero_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["simulate", "--scenario", "no-such-scenario", "--out"])
        .arg(dir.path().join("x.csv"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert_eq!(stderr(&out).lines().filter(|l| l.starts_with("error:")).count(), 1);
    assert!(stderr(&out).contains("no-such-scenario"));

    let out = bin()
        .args(["simulate", "--scenario", "fig3", "--iterations", "0", "--out"])
        .arg(dir.path().join("y.csv"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(stderr(&out).contains("iterations must be at least 1"));
    assert!(!dir.path().join("y.csv").exists());
}
