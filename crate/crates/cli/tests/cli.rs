use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const TINY: &str = r#"
[sim]
num_machines = 2
history_depth = 1
queue_slots = 2
sched_slots = 1
capacity = 4
episode_horizon = 10

[policy]
hidden_units = 2

[train]
num_jobsets = 1
seeds = [3]
trajectories_per_jobset = 2
iterations = 2
jobset_horizon = 5
eval_every = 1
log_wall_clock = false

[eval]
arrival_horizon = 8
"#;

fn placelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_placelab")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = placelab(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tiny_config(dir: &TempDir) -> PathBuf {
    let path = dir.path().join("tiny.toml");
    fs::write(&path, TINY).unwrap();
    path
}

#[test]
fn gen_workload_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for p in [&a, &b] {
        ok(&["gen-workload", "--load", "0.5", "--horizon", "40", "--seed", "7", "--out", s(p)]);
    }
    let text = fs::read(&a).unwrap();
    assert!(!text.is_empty());
    assert_eq!(text, fs::read(&b).unwrap());

    let c = dir.path().join("c.txt");
    ok(&["gen-workload", "--load", "0.5", "--horizon", "40", "--seed", "8", "--out", s(&c)]);
    assert_ne!(text, fs::read(&c).unwrap());
}

#[test]
fn invalid_load_exits_with_one() {
    let dir = TempDir::new().unwrap();
    let out = placelab(&["gen-workload", "--load", "1.5", "--horizon", "40", "--seed", "1", "--out", s(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn unknown_subcommand_exits_with_one() {
    assert_eq!(placelab(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn training_is_reproducible_and_resumable() {
    let dir = TempDir::new().unwrap();
    let cfg = tiny_config(&dir);
    let run_a = dir.path().join("a");
    let run_b = dir.path().join("b");
    ok(&["train", "--config", s(&cfg), "--out", s(&run_a)]);
    ok(&["train", "--config", s(&cfg), "--out", s(&run_b)]);
    let final_a = fs::read(run_a.join("final.ckpt")).unwrap();
    assert_eq!(final_a, fs::read(run_b.join("final.ckpt")).unwrap());
    assert!(run_a.join("checkpoints/iter_000001.ckpt").exists());
    assert!(run_a.join("config.toml").exists());
    let log = fs::read_to_string(run_a.join("train_log.csv")).unwrap();
    assert!(log.starts_with("iteration,mean_penalty"));
    assert_eq!(log.lines().count(), 3);

    let resumed = dir.path().join("resumed");
    let start = run_a.join("checkpoints/iter_000001.ckpt");
    ok(&["train", "--config", s(&cfg), "--out", s(&resumed), "--resume", s(&start)]);
    assert_eq!(final_a, fs::read(resumed.join("final.ckpt")).unwrap());
}

#[test]
fn evaluation_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = tiny_config(&dir);
    let run = dir.path().join("run");
    ok(&["train", "--config", s(&cfg), "--out", s(&run)]);
    let ckpt = run.join("final.ckpt");
    let mut reports = Vec::new();
    for name in ["e1", "e2"] {
        let out = dir.path().join(name);
        ok(&[
            "evaluate", "--policy", "deepplace", "--config", s(&cfg), "--checkpoint", s(&ckpt),
            "--load", "0.5", "--seeds", "1,2", "--out", s(&out), "--dump-image",
        ]);
        assert!(out.join("episode_deepplace_s1.csv").exists());
        assert!(out.join("image_deepplace_s2.csv").exists());
        reports.push(fs::read_to_string(out.join("report.csv")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    assert!(reports[0].starts_with("run,policy,load,metric,dimension,value"));
}

#[test]
fn heuristic_evaluates_a_saved_workload() {
    let dir = TempDir::new().unwrap();
    let cfg = tiny_config(&dir);
    let trace = dir.path().join("trace.txt");
    ok(&["gen-workload", "--config", s(&cfg), "--load", "0.5", "--horizon", "8", "--seed", "3", "--catalog", "test", "--out", s(&trace)]);
    let out = dir.path().join("eval");
    ok(&["evaluate", "--policy", "tetris", "--config", s(&cfg), "--workload", s(&trace), "--out", s(&out)]);
    assert!(out.join("report.csv").exists());
}

#[test]
fn mismatched_checkpoint_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = tiny_config(&dir);
    let run = dir.path().join("run");
    ok(&["train", "--config", s(&cfg), "--out", s(&run)]);
    let bigger = dir.path().join("bigger.toml");
    fs::write(&bigger, TINY.replace("num_machines = 2", "num_machines = 3")).unwrap();
    let out = placelab(&[
        "evaluate", "--policy", "deepplace", "--config", s(&bigger),
        "--checkpoint", s(&run.join("final.ckpt")), "--load", "0.5", "--out", s(&dir.path().join("e")),
    ]);
    assert!(!out.status.success());

    let garbage = dir.path().join("garbage.ckpt");
    fs::write(&garbage, b"not a checkpoint").unwrap();
    let out = placelab(&[
        "evaluate", "--policy", "deepplace", "--config", s(&cfg),
        "--checkpoint", s(&garbage), "--load", "0.5", "--out", s(&dir.path().join("g")),
    ]);
    assert!(!out.status.success());
}

#[test]
fn compare_writes_tables() {
    let dir = TempDir::new().unwrap();
    let cfg = tiny_config(&dir);
    let run = dir.path().join("run");
    ok(&["train", "--config", s(&cfg), "--out", s(&run)]);
    let out = dir.path().join("cmp");
    ok(&[
        "compare", "--config", s(&cfg), "--checkpoint", s(&run.join("final.ckpt")),
        "--loads", "0.3,0.8", "--seeds", "1,2", "--out", s(&out),
    ]);
    let table = fs::read_to_string(out.join("comparison.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("policy,load,metric,dimension,value,rel_vs_tetris"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.iter().all(|r| r.len() == 6));
    for policy in ["deepplace", "tetris", "bestfit"] {
        assert!(rows.iter().any(|r| r[0] == policy));
    }
    for file in ["machines_used.csv", "utilization.csv", "overutilization.csv", "fragmentation.csv"] {
        assert!(out.join(file).exists(), "{file}");
    }
}

#[test]
fn config_defaults_round_trip() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("defaults.toml");
    ok(&["config-defaults", "--out", s(&path)]);
    let printed = ok(&["config-defaults"]).stdout;
    assert_eq!(fs::read(&path).unwrap(), printed);
    // the written defaults are accepted back as a config
    let out = ok(&["gen-workload", "--config", s(&path), "--load", "0.3", "--horizon", "5", "--seed", "1", "--out", s(&dir.path().join("w"))]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("wrote"));
}
