use std::fs;
use std::process::Command;

fn sgiga() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sgiga"))
}

#[test]
fn writes_csv_with_fixed_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("line.csv");
    let svg = dir.path().join("plots");
    let status = sgiga()
        .args(["run", "--example", "line", "--methods", "iga,sgiga2", "--n", "4,8"])
        .args(["--a0", "20", "--deterministic", "--out"])
        .arg(&out)
        .arg("--svg")
        .arg(&svg)
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,N,h,dofs,l2_error,h1_error,scn,wall_ms,notes"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.splitn(9, ',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][0], "iga");
    assert_eq!(rows[0][1], "4");
    assert_eq!(rows[0][3], "36");
    assert!(rows.iter().all(|r| r[7] == "0"));
    assert!(rows.iter().all(|r| r[5].parse::<f64>().unwrap() > 0.0));
    assert!(fs::read_dir(&svg).unwrap().count() > 0);
}

#[test]
fn deterministic_output_is_reproducible() {
    let run = || {
        sgiga()
            .args(["run", "--example", "circle", "--methods", "giga-star", "--n", "6"])
            .args(["--deterministic", "--no-scn"])
            .output()
            .unwrap()
    };
    let (a, b) = (run(), run());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn robustness_sweep_takes_explicit_deltas() {
    let out = sgiga()
        .args(["run", "--example", "robustness", "--methods", "sgiga2"])
        .args(["--deltas", "0.01,0.001", "--no-scn", "--deterministic"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.contains("delta=1e-2") && text.contains("delta=1e-3"));
}

#[test]
fn bad_arguments_fail() {
    let unknown = sgiga()
        .args(["run", "--example", "square"])
        .output()
        .unwrap();
    assert!(!unknown.status.success());
    let bad_delta = sgiga()
        .args(["run", "--example", "robustness", "--deltas", "0.1,abc", "--no-scn"])
        .output()
        .unwrap();
    assert_eq!(bad_delta.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_delta.stderr).contains("bad delta"));
}
