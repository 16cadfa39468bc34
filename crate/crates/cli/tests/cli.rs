use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use qew::postproc::{BoundReport, CorrelationTable};
use qew_cli::sha256_hex;
use serde_json::Value;

fn qew(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qew"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = qew(dir, args);
    assert!(o.status.success(), "{args:?} failed: {}", stderr(&o));
    stdout(&o)
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn schedule_turn_counts() {
    let dir = tempfile::tempdir().unwrap();
    assert!(ok(dir.path(), &["schedule", "-d", "7"]).ends_with("14 turns\n"));
    assert!(ok(dir.path(), &["schedule", "-d", "6"]).ends_with("11 turns\n"));
    let o = qew(dir.path(), &["schedule", "-d", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dimension"));
}

#[test]
fn state_commands() {
    let dir = tempfile::tempdir().unwrap();
    let o = qew(dir.path(), &["state", "--werner", "-f", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("1.5"));

    ok(dir.path(), &["state", "--werner", "-d", "3", "-f", "-0.8", "--out", "w.json"]);
    let rho = qew::qstate::DensityMatrix::from_json(&read(dir.path(), "w.json")).unwrap();
    let f = qew::qstate::expectation(&qew::qstate::swap_operator(3).unwrap(), &rho).unwrap();
    assert!((f + 0.8).abs() < 1e-12);

    let text = ok(dir.path(), &["state", "--bell", "-d", "4"]);
    let s = qew::railsim::RailState::from_json(&text).unwrap();
    for a in 0..4 {
        for b in 0..4 {
            let expected = if a == b { 0.5 } else { 0.0 };
            assert!((s.phi()[(a, b)].re - expected).abs() < 1e-15);
        }
    }
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["provenance"]["tool"], "qew");

    let o = qew(dir.path(), &["state", "--werner"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_bell_exact() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["state", "--bell", "-d", "2", "--out", "bell.json"]);
    ok(p, &["schedule", "-d", "2", "--out", "sched.json"]);
    ok(p, &["simulate", "--state", "bell.json", "--schedule", "sched.json", "--out", "t.json", "--csv", "t.csv"]);
    let t = CorrelationTable::from_json(&read(p, "t.json")).unwrap();
    assert!((t.x[&(0, 1)] - 1.0).abs() < 1e-12);
    assert!((t.y[&(0, 1)] + 1.0).abs() < 1e-12);

    let v: Value = serde_json::from_str(&read(p, "t.json")).unwrap();
    assert_eq!(v["provenance"]["inputs"]["state"], sha256_hex(read(p, "bell.json").as_bytes()));
    assert_eq!(v["provenance"]["inputs"]["schedule"], sha256_hex(read(p, "sched.json").as_bytes()));
    let csv = read(p, "t.csv");
    assert!(csv.starts_with("observable,i,j,value\n"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn simulate_is_deterministic_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["state", "--random", "-d", "4", "--seed", "5", "--out", "r.json"]);
    ok(p, &["schedule", "-d", "4", "--out", "s.json"]);
    let args = ["simulate", "--state", "r.json", "--schedule", "s.json", "--shots", "10000", "--seed", "17"];
    let a = ok(p, &args);
    let b = ok(p, &args);
    assert_eq!(a, b);
    let single = Command::new(env!("CARGO_BIN_EXE_qew"))
        .current_dir(p)
        .args(args)
        .env("QEW_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(stdout(&single), a);
    let other_seed = ok(p, &["simulate", "--state", "r.json", "--schedule", "s.json", "--shots", "10000", "--seed", "18"]);
    assert_ne!(a, other_seed);

    let bad = Command::new(env!("CARGO_BIN_EXE_qew"))
        .current_dir(p)
        .args(args)
        .env("QEW_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn simulate_dimension_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["state", "--bell", "-d", "3", "--out", "s3.json"]);
    ok(p, &["schedule", "-d", "4", "--out", "k4.json"]);
    let o = qew(p, &["simulate", "--state", "s3.json", "--schedule", "k4.json"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("d = 3") && err.contains("d = 4"), "{err}");

    let o = qew(p, &["simulate", "--state", "missing.json", "--schedule", "k4.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bound_console_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["state", "--werner", "-d", "2", "-f", "-1", "--out", "singlet.json"]);
    ok(p, &["schedule", "-d", "2", "--out", "s.json"]);
    ok(p, &["simulate", "--state", "singlet.json", "--schedule", "s.json", "--out", "t.json"]);
    let console = ok(p, &["bound", "--table", "t.json", "--out", "r.json"]);
    assert!(console.contains("bound_final = 1.000000 ebit"), "{console}");
    assert!(console.contains("optimizer: exact"));
    for key in ["f = ", "g = ", "f* = ", "g* = ", "bound_wer = ", "bound_iso = "] {
        assert!(console.contains(key), "missing {key}");
    }
    let r = BoundReport::from_json(&read(p, "r.json")).unwrap();
    assert!((r.bound_final - 1.0).abs() < 1e-9);

    // f = 1/d is the maximally mixed state.
    ok(p, &["state", "--werner", "-d", "2", "-f", "0.5", "--out", "mixed.json"]);
    ok(p, &["simulate", "--state", "mixed.json", "--schedule", "s.json", "--out", "tm.json"]);
    assert!(ok(p, &["bound", "--table", "tm.json"]).contains("bound_final = 0.000000 ebit"));
}

fn synthetic_table(d: usize) -> String {
    let mut x = BTreeMap::new();
    let mut y = BTreeMap::new();
    for a in 1..=d {
        for b in a + 1..=d {
            x.insert(format!("{a},{b}"), 0.0);
            y.insert(format!("{a},{b}"), 0.0);
        }
    }
    let p = vec![1.0 / d as f64; d];
    serde_json::json!({ "d": d, "p": p, "x": x, "y": y }).to_string()
}

#[test]
fn bound_heuristic_flag_and_refusals() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("big.json"), synthetic_table(30)).unwrap();
    let console = ok(p, &["bound", "--table", "big.json", "--mode", "heuristic"]);
    assert!(console.contains("heuristic (lower bound may be loose)"), "{console}");
    let auto = ok(p, &["bound", "--table", "big.json"]);
    assert!(auto.contains("heuristic (lower bound may be loose)"));

    let o = qew(p, &["bound", "--table", "big.json", "--mode", "exact"]);
    assert_eq!(o.status.code(), Some(2));
    let o = qew(p, &["bound", "--table", "big.json", "--mode", "fastest"]);
    assert_eq!(o.status.code(), Some(2));

    std::fs::write(p.join("partial.json"), r#"{"d":2,"p":[0.5,0.5],"x":{"1,2":1.0},"y":{}}"#).unwrap();
    let o = qew(p, &["bound", "--table", "partial.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("y(1,2)"));
}

fn artifact_hashes(dir: &Path) -> Vec<(String, String)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), sha256_hex(&std::fs::read(e.path()).unwrap()))
        })
        .collect();
    v.sort();
    v
}

#[test]
fn pipeline_examples() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let line = ok(p, &["pipeline", "--werner", "-d", "3", "-f", "-1", "--out", "w"]);
    assert_eq!(line.lines().count(), 1);
    assert!(line.starts_with("bound_final = 1.000000 ebit"), "{line}");
    let r = BoundReport::from_json(&read(p, "w/report.json")).unwrap();
    assert!((r.bound_final - 1.0).abs() < 1e-9);

    ok(p, &["pipeline", "--isotropic", "-d", "4", "-g", "4", "--out", "iso"]);
    let r = BoundReport::from_json(&read(p, "iso/report.json")).unwrap();
    assert!((r.bound_final - 2.0).abs() < 1e-9);

    let args = |out: &'static str| {
        ["pipeline", "--random", "-d", "3", "--seed", "8", "--shots", "20000", "--csv", "--out", out]
    };
    ok(p, &args("a"));
    ok(p, &args("b"));
    let (ha, hb) = (artifact_hashes(&p.join("a")), artifact_hashes(&p.join("b")));
    assert_eq!(ha.len(), 5);
    assert_eq!(ha, hb);
}
