use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dnsnmf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnsnmf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path) {
    let out = dnsnmf(&[
        "synth", "--p", "30", "--n", "40", "--dims", "6,3", "--noise", "0.05", "--seed", "2",
        "--out", s(dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_writes_matrix_and_labels() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let csv = fs::read_to_string(tmp.path().join("x.csv")).unwrap();
    assert_eq!(csv.lines().count(), 30);
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 40);
    let labels = fs::read_to_string(tmp.path().join("labels.txt")).unwrap();
    assert_eq!(labels.lines().count(), 40);
}

#[test]
fn evaluate_then_export_features() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data);
    let run = tmp.path().join("run");
    let out = dnsnmf(&[
        "evaluate", "--dims", "6,3", "--theta", "0.3",
        "--data", s(&data.join("x.csv")), "--labels", s(&data.join("labels.txt")),
        "--max-sweeps", "10", "--restarts", "4", "--out", s(&run),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(run.join("report.toml")).unwrap();
    assert!(report.contains("accuracy = "));
    assert!(report.contains("restarts_used = 4"));

    let pgm = tmp.path().join("layer1.pgm");
    let out = dnsnmf(&[
        "export-features", "--checkpoint", s(&run.join("model.ckpt")), "--layer", "1",
        "--shape", "6x5", "--output", s(&pgm),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // six 6x5 tiles on a 3x2 grid
    let bytes = fs::read(&pgm).unwrap();
    assert!(bytes.starts_with(b"P5\n17 13\n255\n"));
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data);
    let cfg = tmp.path().join("exp.toml");
    fs::write(
        &cfg,
        format!(
            "method = \"nsnmf\"\ndims = [3]\ntheta = 0.2\nseed = 4\n\n[dataset]\nkind = \"csv\"\nmatrix = \"{}\"\n",
            s(&data.join("x.csv"))
        ),
    )
    .unwrap();
    let run = tmp.path().join("run");
    let out = dnsnmf(&["factorize", "--config", s(&cfg), "--theta", "0.6", "--out", s(&run)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(run.join("report.toml")).unwrap();
    assert!(report.contains("method = \"nsnmf\""));
    assert!(report.contains("theta = 0.6"));
    assert!(report.contains("global = 4"));
    assert!(!report.contains("[metrics]"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data);
    let x = data.join("x.csv");

    // configuration: unlabeled data for evaluate, nmf with two layers, bad flag
    let out = dnsnmf(&["evaluate", "--dims", "3", "--data", s(&x), "--out", s(&tmp.path().join("a"))]);
    assert_eq!(out.status.code(), Some(1));
    let out = dnsnmf(&["factorize", "--method", "nmf", "--dims", "6,3", "--data", s(&x)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(dnsnmf(&["factorize", "--no-such-flag"]).status.code(), Some(1));

    // data: missing file, negative entry
    let out = dnsnmf(&["factorize", "--dims", "2", "--data", s(&tmp.path().join("missing.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    let neg = tmp.path().join("neg.csv");
    fs::write(&neg, "1,2\n-3,4\n").unwrap();
    let out = dnsnmf(&["factorize", "--dims", "1", "--data", s(&neg)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn depth_study_writes_one_directory_per_arm() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data);
    let dir = tmp.path().join("study");
    let out = dnsnmf(&[
        "depth-study", "--dims", "6,3", "--data", s(&data.join("x.csv")),
        "--labels", s(&data.join("labels.txt")), "--thetas", "0.1,0.4",
        "--max-sweeps", "5", "--restarts", "3", "--out", s(&dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for arm in ["depth-1/theta-0.1", "depth-1/theta-0.4", "depth-2/theta-0.1", "depth-2/theta-0.4"] {
        assert!(dir.join(arm).join("report.toml").exists(), "{arm}");
    }
    let summary = fs::read_to_string(dir.join("depth_study.toml")).unwrap();
    assert_eq!(summary.matches("[[arms]]").count(), 4);
}
