use std::path::Path;
use std::process::{Command, Output};

use fsir::simgen::{Model, ModelSpec};
use fsir::SeededRng;
use fsir_cli::io::{read_roc, read_table, write_dataset};

fn fsir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fsir"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = fsir(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn bytes(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn config_errors_exit_with_2() {
    assert_eq!(fsir(&["simulate", "--set", "bogus=1"]).status.code(), Some(2));
    assert_eq!(fsir(&["simulate", "--epsilon", "-1"]).status.code(), Some(2));
    assert_eq!(fsir(&["simulate", "--set", "h=1"]).status.code(), Some(2));
}

#[test]
fn run_errors_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let missing = dir.path().join("missing.csv");
    let code = fsir(&[
        "estimate",
        "--csv",
        missing.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
    .status
    .code();
    assert_eq!(code, Some(3));
}

#[test]
fn simulate_is_bit_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let common = [
        "simulate", "--model", "III", "--n", "2000", "--k", "5", "--replications", "6", "--seed", "11", "--set",
        "epsilon_x=50", "--set", "trace=true",
    ];
    let mut outs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("t{threads}"));
        let mut args = common.to_vec();
        args.extend(["--threads", threads, "--out", out.to_str().unwrap()]);
        run_ok(&args);
        outs.push(out);
    }
    for file in ["replications.csv", "summary.csv", "trace.jsonl"] {
        assert_eq!(bytes(&outs[0].join(file)), bytes(&outs[1].join(file)), "{file} differs");
    }
    let t = read_table(&outs[0].join("summary.csv"));
    // summary has a text column, so only the replication table parses as numbers
    assert!(t.is_err());
    let reps = std::fs::read_to_string(outs[0].join("replications.csv")).unwrap();
    assert_eq!(reps.lines().count(), 7);

    let other = dir.path().join("seed12");
    let mut args = common.to_vec();
    args[10] = "12";
    args.extend(["--out", other.to_str().unwrap()]);
    run_ok(&args);
    assert_ne!(bytes(&outs[0].join("replications.csv")), bytes(&other.join("replications.csv")));
}

#[test]
fn attack_outputs_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for threads in ["1", "2"] {
        let out = dir.path().join(format!("a{threads}"));
        let stdout = run_ok(&[
            "attack",
            "--replications",
            "8",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(stdout.starts_with("AUC raw="));
        runs.push(out);
    }
    let auc = read_table(&runs[0].join("auc.csv")).unwrap();
    assert_eq!(auc.header, vec!["replication", "raw", "iid", "vgm", "fixed"]);
    assert_eq!(auc.rows(), 8);
    for arm in ["raw", "iid", "vgm", "fixed"] {
        let file = format!("roc_{arm}.csv");
        assert_eq!(bytes(&runs[0].join(&file)), bytes(&runs[1].join(&file)));
        let roc = read_roc(&runs[0].join(&file)).unwrap();
        assert_eq!(roc.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(roc.points.last(), Some(&(1.0, 1.0)));
        assert_eq!(roc.auc, auc.column(arm).unwrap()[0]);
    }
    assert_eq!(bytes(&runs[0].join("auc.csv")), bytes(&runs[1].join("auc.csv")));
}

#[test]
fn csv_estimate_and_screen() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let spec = ModelSpec::new(Model::II, 10, false, &mut SeededRng::new(3, 0)).unwrap();
    let (x, y) = spec.sample(4000, &mut SeededRng::new(4, 0)).unwrap();
    write_dataset(&data, &x, &y).unwrap();

    let out = dir.path().join("est");
    let stdout = run_ok(&[
        "estimate",
        "--csv",
        data.to_str().unwrap(),
        "--k",
        "4",
        "--mechanism",
        "none",
        "--d",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(stdout.starts_with("d=1"), "{stdout}");
    let beta = read_table(&out.join("beta.csv")).unwrap();
    assert_eq!(beta.header, vec!["b1"]);
    assert_eq!(beta.rows(), 10);
    let est = fsir::Matrix::from_vec(10, 1, beta.columns[0].clone());
    let loss = fsir::metrics::projection_loss(&est, &spec.true_beta.columns(0, 1).into_owned()).unwrap();
    assert!(loss < 0.5, "loss {loss}");
    let trace = std::fs::read_to_string(out.join("trace.jsonl")).unwrap();
    assert_eq!(trace.lines().filter(|l| l.contains("\"client-upload\"")).count(), 4);

    let screen = dir.path().join("screen");
    let stdout = run_ok(&[
        "screen",
        "--csv",
        data.to_str().unwrap(),
        "--k",
        "4",
        "--out",
        screen.to_str().unwrap(),
    ]);
    assert!(stdout.starts_with("active set"));
    let active = read_table(&screen.join("active.csv"));
    // the name column is text
    assert!(active.is_err() || active.unwrap().rows() == 0);
    let text = std::fs::read_to_string(screen.join("active.csv")).unwrap();
    assert!(text.starts_with("index,name\n"));
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    run_ok(&[
        "simulate", "--n", "2000", "--k", "3", "--replications", "3", "--set", "epsilon_x=50", "--out",
        first.to_str().unwrap(),
    ]);
    let second = dir.path().join("second");
    run_ok(&[
        "simulate",
        "--config",
        first.join("config.toml").to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert_eq!(bytes(&first.join("replications.csv")), bytes(&second.join("replications.csv")));
}
