use std::path::Path;
use std::process::{Command, Output};

const QUICK: &[&str] = &[
    "--set", "irl.updates=40",
    "--set", "irl.parallel_envs=4",
    "--set", "irl.batch_size=10",
    "--set", "expert.trajectories=30",
    "--set", "dqn.updates=300",
    "--set", "eval.episodes=100",
    "--set", "eval.curve_episodes=10",
    "--set", "eval.curve_points=2",
];

fn big(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_big"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .args(QUICK)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn stages_chain_through_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&big(d, &["expert-data", "--env", "tiger_treasure", "--out", "run"])), 0);
    assert_eq!(code(&big(d, &["irl", "--env", "tiger_treasure", "--expert", "run/expert.csv", "--out", "run"])), 0);
    for f in ["omega_map.csv", "reward_table.csv", "fit_log.csv"] {
        assert!(d.join("run").join(f).exists(), "{f}");
    }
    std::fs::write(d.join("cells.csv"), "s,a\n1,0\n2,0\n").unwrap();
    let coe = big(
        d,
        &["coe", "--in", "run/reward_table.csv", "--kstar", "-0.5", "--rmin", "-100", "--rmax", "10", "--coe-set", "cells.csv", "--out", "run"],
    );
    assert_eq!(code(&coe), 0, "{}", String::from_utf8_lossy(&coe.stderr));
    let refined = std::fs::read_to_string(d.join("run/reward_final.csv")).unwrap();
    assert!(refined.starts_with("s,a,value,provenance\n"));
    assert!(refined.contains("1,0,-5.0,COE"));

    assert_eq!(code(&big(d, &["bamdp", "--env", "tiger_treasure", "--reward", "run/reward_final.csv", "--out", "run"])), 0);
    let trained = std::fs::read_to_string(d.join("run/metrics.csv")).unwrap();
    assert_eq!(code(&big(d, &["eval", "--env", "tiger_treasure", "--qtable", "run/qtable.csv", "--out", "again"])), 0);
    // the reloaded table acts identically on the same evaluation stream
    assert_eq!(std::fs::read_to_string(d.join("again/metrics.csv")).unwrap(), trained);
}

#[test]
fn settings_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = big(dir.path(), &["validate"]);
    assert_eq!(code(&missing), 1);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("`env`"));
    assert_eq!(code(&big(dir.path(), &["validate", "--env", "no_such_env"])), 1);
    assert_eq!(code(&big(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&big(dir.path(), &["validate", "--env", "latent_chain", "--seeds", "5..2"])), 1);
}

#[test]
fn divergence_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = big(dir.path(), &["irl", "--env", "tiger_treasure", "--set", "irl.divergence_bound=1e-9"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn shipped_configs_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["tiger_treasure", "latent_chain", "tiger_maze"] {
        let path = root.join(format!("{name}.cfg"));
        let out = big(Path::new("."), &["validate", "--config", path.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).contains(name));
    }
}

#[test]
fn run_writes_per_seed_folders_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = big(dir.path(), &["run", "--env", "latent_chain", "--seeds", "0..2", "--out", "res"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["summary.csv", "run.cfg", "seed_0/metrics.csv", "seed_1/qtable.csv"] {
        assert!(dir.path().join("res").join(f).exists(), "{f}");
    }
}

#[test]
fn experiment_picks_the_figure_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = big(dir.path(), &["experiment", "fig3", "--seeds", "0..1", "--out", "f3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let curves = std::fs::read_to_string(dir.path().join("f3/fig3.csv")).unwrap();
    assert!(curves.starts_with("policy,seed,step,return,return_se\n"));
    for policy in ["ground_truth", "latent", "no_latent"] {
        assert!(curves.lines().any(|l| l.starts_with(&format!("{policy},"))), "{policy}");
    }
}
