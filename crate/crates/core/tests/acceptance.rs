//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! The criteria share one `Suite` behind a mutex so the ball solves and the
//! heat eigensystem are computed once, and so no two criteria run at the same
//! time while their runtimes are measured.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::{Mutex, MutexGuard, OnceLock};

use fracheat::acceptance::{Outcome, Suite};

static SUITE: OnceLock<Mutex<Suite>> = OnceLock::new();

fn suite() -> MutexGuard<'static, Suite> {
    SUITE.get_or_init(|| Mutex::new(Suite::new(0))).lock().unwrap_or_else(|e| e.into_inner())
}

fn report(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
}

fn check(id: usize) {
    let o: Outcome = suite().run(id);
    report(&o.line());
    assert!(o.passed && o.within_budget(), "criterion {id} failed: {}", o.detail);
}

#[test]
fn criterion_01() {
    check(1);
}

#[test]
fn criterion_02() {
    check(2);
}

#[test]
fn criterion_03() {
    check(3);
}

#[test]
fn criterion_04() {
    check(4);
}

#[test]
fn criterion_05() {
    check(5);
}

#[test]
fn criterion_06() {
    check(6);
}

#[test]
fn criterion_07() {
    check(7);
}

#[test]
fn criterion_08() {
    check(8);
}

#[test]
fn criterion_09() {
    check(9);
}

#[test]
fn criterion_10() {
    check(10);
}

#[test]
fn criterion_11() {
    check(11);
}

#[test]
fn criterion_12() {
    check(12);
}

#[test]
fn criterion_13() {
    check(13);
}

#[test]
fn criterion_14() {
    check(14);
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

/// Two independent `audit-all` runs with the default configuration exit
/// cleanly and write byte-identical artifacts.
#[test]
fn criterion_15() {
    let _guard = suite();
    let start = std::time::Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = Command::new(env!("CARGO_BIN_EXE_fracheat"))
            .args(["audit-all", "--out"])
            .arg(&out_dir)
            .output()
            .expect("binary runs");
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        runs.push(artifacts(&out_dir));
    }
    let identical = !runs[0].is_empty() && runs[0] == runs[1];
    report(&format!(
        "[{}] 15 determinism                        files={:<6} identical={identical} ({:.2}s)",
        if identical { "PASS" } else { "FAIL" },
        runs[0].len(),
        start.elapsed().as_secs_f64()
    ));
    assert!(identical, "artifacts differ between runs");
}
