use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;
use tempfile::TempDir;

use crnbalance::cli::{run, EXIT_ERROR, EXIT_OK, EXIT_VERDICT};

const TWO_CYCLE: &str = "\
species: n1 n2 n3 n4 n5 n6
n1 + n5 <-> n2
n1 + n6 <-> n2
n2 <-> n3
n1 <-> n4
n3 <-> n4 + n6
n3 <-> n4 + n5
";

const RING: &str = "\
species: A B C D
A <-> B ; kf=2 kr=1
B <-> C ; kf=3 kr=1
C <-> D ; kf=4 kr=1
D <-> A ; kf=5 kr=1
";

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("{e}: {}", self.stdout))
    }
}

fn cli(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(
        std::iter::once("crnbalance").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_db_exit_codes() {
    let dir = TempDir::new().unwrap();
    let balanced = write(&dir, "ok.crn", TWO_CYCLE);
    let r = cli(&["check-db", s(&balanced)]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["command"], "check-db");
    assert_eq!(v["result"]["verdict"]["balanced"], true);

    let skewed = TWO_CYCLE.replace("n2 <-> n3", "n2 <-> n3 ; kf=2 kr=1");
    let unbalanced = write(&dir, "bad.crn", &skewed);
    let r = cli(&["check-db", s(&unbalanced)]);
    assert_eq!(r.code, EXIT_VERDICT);
    let violated = r.json()["result"]["verdict"]["violated_cycles"]
        .as_array()
        .unwrap()
        .len();
    assert!(violated > 0);
}

#[test]
fn reduce_reports_the_flipped_circuit() {
    let dir = TempDir::new().unwrap();
    let text = TWO_CYCLE.replace("n3 <-> n4 + n5", "n3 <-> n4 + n5 ; kf=2 kr=2");
    let path = write(&dir, "k6.crn", &text);
    let r = cli(&["reduce", s(&path), "--freeze", "n5=1,n6=2"]);
    assert_eq!(r.code, EXIT_VERDICT, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["result"]["stability"]["verdict"], "NOT_DB");
    let cycles = v["result"]["reduced_detailed_balance"]["violated_cycles"]
        .as_array()
        .unwrap();
    assert_eq!(cycles.len(), 1);
    let value = cycles[0]["circuit_value"].as_f64().unwrap();
    let expected: f64 = 9.0 / 8.0;
    assert!(
        (value - expected).abs() < 1e-12 || (value - expected.recip()).abs() < 1e-12,
        "circuit value {value}"
    );

    let r = cli(&["reduce", s(&path), "--freeze", "n5=1,n6=1"]);
    assert_eq!(r.code, EXIT_OK);
    assert_eq!(
        r.json()["result"]["reduced_detailed_balance"]["balanced"],
        true
    );
}

#[test]
fn reduce_takes_frozen_line_from_the_file() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "f.crn", &format!("{TWO_CYCLE}frozen: n1=2, n4=2\n"));
    let r = cli(&["reduce", s(&path)]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert_eq!(
        r.json()["result"]["reduced_detailed_balance"]["balanced"],
        true
    );

    let path = write(&dir, "g.crn", &format!("{TWO_CYCLE}frozen: n1=2, n4=3\n"));
    let r = cli(&["reduce", s(&path)]);
    assert_eq!(
        r.json()["result"]["reduced_detailed_balance"]["balanced"],
        false
    );
}

#[test]
fn constrained_ring_completes() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "ring.crn", RING);
    let emitted = dir.path().join("closed.crn");
    let r = cli(&[
        "complete",
        s(&path),
        "--constrain",
        "B <-> C",
        "--emit",
        s(&emitted),
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["result"]["outcome"], "COMPLETED");
    assert_eq!(v["result"]["certificate"]["all_green"], true);

    // The emitted network is itself closed and balanced.
    let r = cli(&["check-db", s(&emitted)]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
}

#[test]
fn fully_constrained_ring_is_impossible() {
    let dir = TempDir::new().unwrap();
    let text = format!("{RING}constrained: A <-> B, B <-> C, C <-> D, D <-> A\n");
    let path = write(&dir, "ring.crn", &text);
    let r = cli(&["complete", s(&path)]);
    assert_eq!(r.code, EXIT_VERDICT, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["result"]["outcome"], "IMPOSSIBLE");
    assert_eq!(v["result"]["cycle_reactions"].as_array().unwrap().len(), 4);
    let value = v["result"]["circuit_value"].as_f64().unwrap();
    assert!(
        (value - 120.0).abs() < 1e-9 || (value - 1.0 / 120.0).abs() < 1e-12,
        "circuit value {value}"
    );
}

#[test]
fn output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "ring.crn", RING);
    for args in [
        vec!["analyze", s(&path)],
        vec!["complete", s(&path)],
        vec!["complete", s(&path), "--minimal"],
    ] {
        let a = cli(&args);
        let b = cli(&args);
        assert_eq!(a.code, EXIT_OK);
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn parse_errors_name_the_location() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "broken.crn", "species: A B\nA <-> Q\n");
    let r = cli(&["analyze", s(&path)]);
    assert_eq!(r.code, EXIT_ERROR);
    assert!(r.stdout.is_empty());
    let prefix = format!("{}:2:", path.display());
    assert!(r.stderr.contains(&prefix), "{}", r.stderr);
}

#[test]
fn missing_file_is_an_error() {
    let r = cli(&["analyze", "/nonexistent/x.crn"]);
    assert_eq!(r.code, EXIT_ERROR);
    assert!(r.stderr.contains("/nonexistent/x.crn"));
}

#[test]
fn simulate_writes_csv() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "iso.crn", "species: A B\nA <-> B ; kf=2 kr=1\n");
    let csv = dir.path().join("t.csv");
    let r = cli(&[
        "simulate",
        s(&path),
        "--init",
        "A=1",
        "--t-end",
        "20",
        "--csv",
        s(&csv),
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let text = fs::read_to_string(&csv).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("t,"), "{header}");
    assert!(header.contains('A') && header.contains('B'), "{header}");
    let v = r.json();
    let final_state = &v["result"]["final_state"];
    let a = final_state["A"]
        .as_f64()
        .or_else(|| final_state[0].as_f64())
        .unwrap();
    assert!((a - 1.0 / 3.0).abs() < 1e-6, "A = {a}");
}

#[test]
fn db_tol_comes_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let text = TWO_CYCLE.replace("n2 <-> n3", "n2 <-> n3 ; kf=1.001 kr=1");
    let path = write(&dir, "near.crn", &text);
    assert_eq!(cli(&["check-db", s(&path)]).code, EXIT_VERDICT);
    assert_eq!(
        cli(&["check-db", s(&path), "--db-tol", "0.01"]).code,
        EXIT_OK
    );
    std::env::set_var("CRNBALANCE_DB_TOL", "0.01");
    let code = cli(&["check-db", s(&path)]).code;
    std::env::remove_var("CRNBALANCE_DB_TOL");
    assert_eq!(code, EXIT_OK);
    assert_eq!(
        cli(&["check-db", s(&path), "--db-tol", "-1"]).code,
        EXIT_ERROR
    );
}
