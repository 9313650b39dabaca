use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn qst(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qst"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn csv_column(text: &str, col: usize) -> Vec<f64> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').nth(col).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn build_matrix_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let args = [
        "--waveguides",
        "20",
        "--photons",
        "3",
        "--order",
        "2",
        "--coupling",
        "1.0",
        "--z",
        "2.5",
        "--basis",
        "fock",
    ];
    let first = ok(&qst(
        dir.path(),
        &[&["build-matrix"][..], &args, &["--output", "a.qstm"]].concat(),
    ));
    assert!(first.starts_with("210x1540 sensing matrix"));
    assert!(first.contains("degenerate groups: 0"));
    ok(&qst(
        dir.path(),
        &[&["build-matrix"][..], &args, &["--output", "b.qstm"]].concat(),
    ));
    assert_eq!(
        fs::read(dir.path().join("a.qstm")).unwrap(),
        fs::read(dir.path().join("b.qstm")).unwrap()
    );
}

#[test]
fn entangled_report_lists_the_degenerate_pair() {
    let dir = TempDir::new().unwrap();
    let out = ok(&qst(
        dir.path(),
        &[
            "build-matrix",
            "--basis",
            "entangled",
            "--pair",
            "3,8",
            "--output",
            "e.qstm",
        ],
    ));
    assert!(out.contains("degenerate groups: 1"), "{out}");
    assert_eq!(out.lines().filter(|l| l.starts_with("  ")).count(), 1);
}

#[test]
fn single_element_round_trip_scores_one() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(&qst(d, &["build-matrix", "--output", "m.qstm"]));
    ok(&qst(
        d,
        &[
            "simulate",
            "--matrix",
            "m.qstm",
            "--sparsity",
            "1",
            "--seed",
            "3",
            "--measurements",
            "g.csv",
            "--truth",
            "t.json",
        ],
    ));
    let out = qst(
        d,
        &[
            "recover",
            "--matrix",
            "m.qstm",
            "--measurements",
            "g.csv",
            "--truth",
            "t.json",
            "--record",
            "r.csv",
        ],
    );
    let report: serde_json::Value = serde_json::from_str(&ok(&out)).unwrap();
    assert!((report["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    assert_eq!(report["support"].as_array().unwrap().len(), 1);
    let records = fs::read_to_string(d.join("r.csv")).unwrap();
    assert!(records.starts_with("K,snr_db,lambda,seed,fidelity"));
    assert!(records.lines().nth(1).unwrap().starts_with("1,inf,0,3,"));
}

#[test]
fn basis_mismatch_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(&qst(d, &["build-matrix", "--output", "fock.qstm"]));
    ok(&qst(
        d,
        &[
            "build-matrix",
            "--basis",
            "entangled",
            "--output",
            "ent.qstm",
        ],
    ));
    ok(&qst(
        d,
        &[
            "simulate",
            "--matrix",
            "fock.qstm",
            "--sparsity",
            "4",
            "--measurements",
            "g.csv",
            "--truth",
            "t.json",
        ],
    ));
    let out = qst(
        d,
        &[
            "recover",
            "--matrix",
            "ent.qstm",
            "--measurements",
            "g.csv",
            "--truth",
            "t.json",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("basis mismatch"));
    let out = qst(
        d,
        &[
            "simulate",
            "--matrix",
            "missing.qstm",
            "--sparsity",
            "4",
            "--measurements",
            "g.csv",
            "--truth",
            "t.json",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn invalid_arguments_exit_with_two() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        qst(dir.path(), &["impulse", "--waveguides", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        qst(dir.path(), &["impulse", "--bogus"]).status.code(),
        Some(2)
    );
    let out = Command::new(env!("CARGO_BIN_EXE_qst"))
        .current_dir(dir.path())
        .env("QST_THREADS", "many")
        .args(["impulse"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn impulse_matches_bessel_and_identity() {
    let dir = TempDir::new().unwrap();
    let out = ok(&qst(
        dir.path(),
        &[
            "impulse",
            "--waveguides",
            "61",
            "--cz",
            "2.0",
            "--input",
            "31",
            "--bessel",
        ],
    ));
    let sim = csv_column(&out, 1);
    let reference = csv_column(&out, 2);
    assert_eq!(sim.len(), 61);
    let worst = sim
        .iter()
        .zip(&reference)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst:e}");
    assert!((sim.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    let out = ok(&qst(
        dir.path(),
        &["impulse", "--waveguides", "9", "--z", "0", "--input", "4"],
    ));
    let p = csv_column(&out, 1);
    assert_eq!(p, [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
}

#[test]
fn sweeps_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(&qst(d, &["build-matrix", "--output", "m.qstm"]));
    let args = [
        "sweep",
        "--matrix",
        "m.qstm",
        "--axis",
        "snr",
        "--values",
        "20,30,40",
        "--sparsity",
        "5",
        "--lambda",
        "0.02",
        "--trials",
        "8",
    ];
    ok(&qst(
        d,
        &[&args[..], &["--output", "a.csv", "--records", "ra.csv"]].concat(),
    ));
    let one = Command::new(env!("CARGO_BIN_EXE_qst"))
        .current_dir(d)
        .env("QST_THREADS", "1")
        .args([&args[..], &["--output", "b.csv", "--records", "rb.csv"]].concat())
        .output()
        .unwrap();
    ok(&one);
    let a = fs::read_to_string(d.join("a.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(d.join("b.csv")).unwrap());
    assert_eq!(
        fs::read(d.join("ra.csv")).unwrap(),
        fs::read(d.join("rb.csv")).unwrap()
    );
    assert_eq!(a.lines().count(), 4);
    assert_eq!(
        fs::read_to_string(d.join("ra.csv"))
            .unwrap()
            .lines()
            .count(),
        25
    );
}

#[test]
fn config_file_supplies_flags_and_cli_wins() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(
        d.join("c.json"),
        r#"{"waveguides": 7, "z": 0.0, "input": 2, "bessel": true}"#,
    )
    .unwrap();
    let out = ok(&qst(d, &["impulse", "--config", "c.json"]));
    assert_eq!(out.lines().count(), 8);
    assert!(out.starts_with("waveguide,probability,bessel"));
    let out = ok(&qst(
        d,
        &["impulse", "--config", "c.json", "--waveguides", "9"],
    ));
    assert_eq!(out.lines().count(), 10);
    fs::write(d.join("bad.json"), "[1, 2]").unwrap();
    assert_eq!(
        qst(d, &["impulse", "--config", "bad.json"]).status.code(),
        Some(2)
    );
}
