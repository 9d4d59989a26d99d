use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
seed = 4
repetitions = 2
seed_episodes = 20
retrain_interval = 10
initial_epochs = 1
subsequent_epochs = 1
eval_episodes = 3
sweep_episodes = 2
noise_levels = 0, 0.01
drop_levels = 0, 4
";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pbprnn"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.cfg"), SMALL).unwrap();
    dir
}

#[test]
fn unknown_subcommand_exits_1() {
    let dir = setup();
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(1));
}

#[test]
fn bad_config_exits_2() {
    let dir = setup();
    fs::write(dir.path().join("bad.cfg"), "initial_epochs = banana\n").unwrap();
    let out = run(dir.path(), &["eval", "--config", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("initial_epochs"));
}

#[test]
fn repeated_runs_write_identical_metrics() {
    let dir = setup();
    let mut files = Vec::new();
    for (out, workers) in [("a", "1"), ("b", "1"), ("c", "2")] {
        ok(dir.path(), &["eval", "--config", "small.cfg", "--out", out, "--workers", workers]);
        files.push(fs::read(dir.path().join(out).join("metrics_pbp_rnn.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(files[0], files[2]);
    assert_eq!(String::from_utf8_lossy(&files[0]).lines().count(), 1 + 2 * 4);
}

#[test]
fn seed_changes_the_metrics() {
    let dir = setup();
    ok(dir.path(), &["eval", "--config", "small.cfg", "--out", "a"]);
    ok(dir.path(), &["eval", "--config", "small.cfg", "--out", "b", "--seed", "5"]);
    let a = fs::read(dir.path().join("a/metrics_pbp_rnn.csv")).unwrap();
    let b = fs::read(dir.path().join("b/metrics_pbp_rnn.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn trained_checkpoint_feeds_evaluation() {
    let dir = setup();
    for model in ["pbp_rnn", "mde"] {
        let ckpt = format!("{model}.ckpt");
        ok(dir.path(), &["train", "--config", "small.cfg", "--model", model, "--checkpoint", &ckpt]);
        assert!(dir.path().join(&ckpt).exists());
        for out in ["x", "y"] {
            ok(dir.path(), &["eval", "--config", "small.cfg", "--model", model, "--checkpoint", &ckpt, "--out", out]);
        }
        let name = format!("metrics_{model}.csv");
        let x = fs::read(dir.path().join("x").join(&name)).unwrap();
        let y = fs::read(dir.path().join("y").join(&name)).unwrap();
        assert_eq!(x, y);
    }
}

#[test]
fn sweeps_write_one_curve_row_per_level() {
    let dir = setup();
    ok(dir.path(), &["train", "--config", "small.cfg", "--checkpoint", "m.ckpt"]);
    for (cmd, name) in [("sweep-noise", "noise"), ("sweep-drop", "drop")] {
        ok(dir.path(), &[cmd, "--config", "small.cfg", "--checkpoint", "m.ckpt", "--out", "s"]);
        let curves = fs::read_to_string(dir.path().join(format!("s/curves_{name}_pbp_rnn.csv"))).unwrap();
        assert_eq!(curves.lines().count(), 3, "{curves}");
    }
}

#[test]
fn timing_reports_both_models() {
    let dir = setup();
    ok(dir.path(), &["bench-timing", "--queries", "20", "--out", "t"]);
    let csv = fs::read_to_string(dir.path().join("t/timing.csv")).unwrap();
    assert!(csv.contains("pbp_rnn,20,") && csv.contains("mde,20,"), "{csv}");
}
