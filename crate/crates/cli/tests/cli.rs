use std::io::Write;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spectral-confound"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// Deterministic predictors with a mixed target; no RNG crate needed here.
fn write_dataset(path: &Path, header: bool) {
    let mut f = std::fs::File::create(path).unwrap();
    if header {
        writeln!(f, "x1,x2,x3,y").unwrap();
    }
    for i in 0..200 {
        let t = i as f64;
        let x1 = (0.37 * t).sin() * 3.0;
        let x2 = (1.13 * t).cos() + 0.2 * x1;
        let x3 = (2.71 * t + 0.5).sin() * 0.5 - 0.1 * x2;
        let y = 0.4 * x1 - 1.1 * x2 + 2.0 * x3 + (0.61 * t).sin();
        writeln!(f, "{x1},{x2},{x3},{y}").unwrap();
    }
}

#[test]
fn estimate_prints_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    write_dataset(&path, true);
    let out = run(&[
        "estimate",
        "--input",
        path.to_str().unwrap(),
        "--target",
        "y",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rec = &report["records"][0];
    assert_eq!(rec["label"], "y");
    assert_eq!(rec["d"], 3);
    let beta = rec["beta_hat"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&beta));
    assert!(rec["p_value"].is_null());
    // timing goes to stderr only
    assert!(String::from_utf8_lossy(&out.stderr).contains(" s"));
}

#[test]
fn test_by_index_without_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    write_dataset(&path, false);
    let out = run(&[
        "test",
        "--input",
        path.to_str().unwrap(),
        "--target",
        "3",
        "--null-samples",
        "200",
        "--seed",
        "5",
    ]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let p = report["records"][0]["p_value"].as_f64().unwrap();
    assert!(p > 0.0 && p <= 1.0);
}

#[test]
fn simulate_is_byte_identical_across_invocations() {
    let args = [
        "simulate",
        "--runs",
        "8",
        "--samples",
        "500",
        "--seed",
        "11",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let report: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(report["records"].as_array().unwrap().len(), 8);
}

#[test]
fn csv_output_writes_sibling_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("runs.csv");
    let out = run(&[
        "overfit",
        "--runs",
        "3",
        "--samples",
        "20,100",
        "--dim",
        "3",
        "--null-samples",
        "100",
        "--format",
        "csv",
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let records = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(records.lines().count(), 1 + 6);
    let summary = std::fs::read_to_string(dir.path().join("runs.summary.csv")).unwrap();
    assert!(summary.contains("n=20.count,3"));
    assert!(summary.contains("n=100.count,3"));
}

#[test]
fn chi2_null_method_accepted() {
    let out = run(&[
        "rejections",
        "--runs",
        "4",
        "--samples",
        "300",
        "--null-method",
        "chi2",
        "--null-samples",
        "100",
    ]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["config"]["null_method"], "mixed_chi2");
}

#[test]
fn shuffle_target_reports_every_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    write_dataset(&path, true);
    let out = run(&[
        "shuffle-target",
        "--input",
        path.to_str().unwrap(),
        "--normalize",
    ]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let labels: Vec<&str> = report["records"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["label"].as_str().unwrap())
        .collect();
    assert_eq!(labels, ["x1", "x2", "x3", "y"]);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["estimate", "--target", "y"])), 1);
    assert_eq!(code(&run(&["simulate", "--alpha", "1.5"])), 1);
    assert_eq!(code(&run(&["simulate", "--samples", "100,200"])), 1);
    assert_eq!(code(&run(&["simulate", "--dim", "10", "--latent", "5"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    assert_eq!(
        code(&run(&[
            "estimate",
            "--input",
            missing.to_str().unwrap(),
            "--target",
            "y"
        ])),
        2
    );

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b,y\n1,2,3\n4,x,6\n").unwrap();
    let out = run(&[
        "estimate",
        "--input",
        bad.to_str().unwrap(),
        "--target",
        "y",
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 3"));

    let path = dir.path().join("data.csv");
    write_dataset(&path, true);
    assert_eq!(
        code(&run(&[
            "estimate",
            "--input",
            path.to_str().unwrap(),
            "--target",
            "zz"
        ])),
        2
    );
}

#[test]
fn numeric_failures_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("collinear.csv");
    std::fs::write(&path, "a,b,y\n1,2,3\n2,4,6\n3,6,9\n4,8,12\n5,10,14\n").unwrap();
    assert_eq!(
        code(&run(&[
            "estimate",
            "--input",
            path.to_str().unwrap(),
            "--target",
            "y"
        ])),
        3
    );
}
