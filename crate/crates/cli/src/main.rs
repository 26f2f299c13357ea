//! `big`: command-line front end for the reward-inference and
//! Bayes-adaptive policy pipeline.
//!
//! Exit status: 0 on success, 1 on a settings or input error, 2 when a fit or
//! policy update diverges.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use big_core::bamdp::{evaluate_policy, qtable_from_rows};
use big_core::birl::posterior_predictive_reward_raw;
use big_core::cmdp::RewardTable;
use big_core::config::Config;
use big_core::harness::{
    read_expert, run_all, run_fig2, run_fig3, run_fig4, stage_expert, stage_fit, stage_policy, write_expert,
    write_fit, ExperimentConfig, HarnessError,
};
use big_core::io::{
    read_csv, write_csv, CellRow, FinalRewardRow, IoError, QRow, RewardRow, COE_SET_HEADER, FINAL_REWARD_HEADER,
    METRICS_HEADER, QTABLE_HEADER, REWARD_HEADER,
};
use big_core::reward::{apply_coe, rescale_or_floor, CoeSpec, KPrior, PredictiveReward};
use big_core::rng::RngStream;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

#[derive(Parser, Debug)]
#[command(name = "big", version, about = "Contextual Bayesian IRL with cost-of-exploration priors")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Settings file (`key = value` lines); unset keys take environment defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Environment name, overriding the `env` key.
    #[arg(long, global = true)]
    env: Option<String>,
    /// Seed for single-run verbs.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Seed range `n..m` (end exclusive) for `run` and `experiment`.
    #[arg(long, global = true)]
    seeds: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Extra `key=value` settings, applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the settings and environment, then print the settings hash.
    Validate,
    /// Sample expert demonstrations into `expert.csv` and `contexts.csv`.
    ExpertData,
    /// Fit the reward; writes `omega_map.csv`, `reward_table.csv`, `fit_log.csv`, `sf.csv`.
    Irl {
        /// Use these demonstrations instead of sampling new ones.
        #[arg(long)]
        expert: Option<PathBuf>,
    },
    /// Rescale a learned reward and apply the exploration prior; writes `reward_final.csv`.
    Coe {
        #[arg(long = "in")]
        input: PathBuf,
        /// Exploration reward as a fraction of `--rmax`; omit for the IRL-only reward.
        #[arg(long, allow_hyphen_values = true)]
        kstar: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        rmin: f64,
        #[arg(long, allow_hyphen_values = true)]
        rmax: f64,
        /// CSV `s,a` listing of exploration cells.
        #[arg(long)]
        coe_set: Option<PathBuf>,
    },
    /// Learn a belief-conditioned policy; writes `qtable.csv` and `metrics.csv`.
    Bamdp {
        #[arg(long)]
        reward: PathBuf,
    },
    /// Score a saved policy; writes `metrics.csv`.
    Eval {
        #[arg(long)]
        qtable: PathBuf,
        /// Score under this reward instead of the environment's true reward.
        #[arg(long)]
        reward: Option<PathBuf>,
    },
    /// Full pipeline for every seed; writes per-seed folders and `summary.csv`.
    Run,
    /// Regenerate the data behind one figure.
    Experiment {
        #[arg(value_enum)]
        figure: Figure,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Figure {
    Fig2,
    Fig3,
    Fig4,
}

impl Figure {
    fn default_env(self) -> &'static str {
        match self {
            Figure::Fig2 => "tiger_treasure",
            Figure::Fig3 => "latent_chain",
            Figure::Fig4 => "tiger_maze",
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn settings(global: &Global, default_env: Option<&str>) -> Result<ExperimentConfig, HarnessError> {
    let mut user = match &global.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(env) = &global.env {
        user.set("env", env);
    } else if let (false, Some(env)) = (user.contains("env"), default_env) {
        user.set("env", env);
    }
    if let Some(seeds) = &global.seeds {
        user.set("seeds", seeds);
    }
    if let Some(out) = &global.out {
        user.set("out", out.display());
    }
    for kv in &global.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| big_core::config::ConfigError::BadValue { key: "--set".into(), value: kv.clone() })?;
        user.set(k.trim(), v.trim());
    }
    ExperimentConfig::from_config(&user)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let g = &cli.global;
    match cli.command {
        Command::Validate => {
            let cfg = settings(g, None)?;
            let env = cfg.build_env()?;
            println!(
                "ok: {} with {} states, {} actions, {} contexts; settings hash {}",
                cfg.env.name(),
                env.mdp.num_states(),
                env.mdp.num_actions(),
                env.mdp.num_contexts(),
                cfg.hash()
            );
        }
        Command::ExpertData => {
            let cfg = settings(g, None)?;
            let env = cfg.build_env()?;
            let data = stage_expert(&cfg, &env, g.seed)?;
            write_expert(&cfg.out_dir, &data)?;
            info!("wrote {} trajectories to {}", data.len(), cfg.out_dir.display());
        }
        Command::Irl { expert } => {
            let cfg = settings(g, None)?;
            let env = cfg.build_env()?;
            let trajectories = match expert {
                Some(path) => read_expert(&path)?,
                None => stage_expert(&cfg, &env, g.seed)?.trajectories,
            };
            let fit = stage_fit(&env, &trajectories, &cfg.fit, g.seed)?;
            info!(
                "fit stopped after {} updates, final gradient norm {:.3e} (converged: {})",
                fit.result.steps, fit.result.final_grad_norm, fit.result.converged
            );
            let raw = posterior_predictive_reward_raw(&fit.result, &env.mdp)?;
            write_fit(&cfg.out_dir, &fit, &raw)?;
        }
        Command::Coe { input, kstar, rmin, rmax, coe_set } => {
            let raw = read_reward_table(&input)?;
            let cells: Vec<(usize, usize)> = match &coe_set {
                Some(path) => read_csv::<CellRow>(path, COE_SET_HEADER)?.into_iter().map(|c| (c.s, c.a)).collect(),
                None => Vec::new(),
            };
            let scaled = rescale_or_floor(&raw, rmin, rmax)?;
            let spec = match kstar {
                Some(k) if !cells.is_empty() => CoeSpec::shared(&cells, KPrior::Point(k), rmin, rmax)?,
                _ => CoeSpec::disabled(rmin, rmax),
            };
            let refined = apply_coe(&scaled, &spec)?;
            let out = g.out.clone().unwrap_or_else(|| PathBuf::from("."));
            write_csv(out.join("reward_final.csv"), FINAL_REWARD_HEADER, refined.to_rows())?;
        }
        Command::Bamdp { reward } => {
            let cfg = settings(g, None)?;
            let env = cfg.build_env()?;
            let rows: Vec<FinalRewardRow> = read_csv(&reward, FINAL_REWARD_HEADER)?;
            let refined = PredictiveReward::from_rows(env.mdp.num_states(), env.mdp.num_actions(), &rows)?;
            let out = stage_policy(&cfg, &env, &refined.table, g.seed, false)?;
            write_csv(cfg.out_dir.join("qtable.csv"), QTABLE_HEADER, out.table.to_rows())?;
            write_csv(cfg.out_dir.join("metrics.csv"), METRICS_HEADER, out.metrics.to_rows())?;
            info!("true-reward return {:.4} ± {:.4}", out.metrics.mean_return, out.metrics.return_se);
        }
        Command::Eval { qtable, reward } => {
            let cfg = settings(g, None)?;
            let env = cfg.build_env()?;
            let rows: Vec<QRow> = read_csv(&qtable, QTABLE_HEADER)?;
            let table = qtable_from_rows(&rows, env.mdp.num_actions(), cfg.q.keyer, env.mdp.gamma())?;
            let score = match &reward {
                Some(path) => {
                    let rows: Vec<FinalRewardRow> = read_csv(path, FINAL_REWARD_HEADER)?;
                    PredictiveReward::from_rows(env.mdp.num_states(), env.mdp.num_actions(), &rows)?.table
                }
                None => env.true_reward(),
            };
            let mut rng = RngStream::new(g.seed).fork(4);
            let metrics = evaluate_policy(&env, &mut &table, &score, cfg.eval_episodes, cfg.eval_horizon, &mut rng)?;
            write_csv(cfg.out_dir.join("metrics.csv"), METRICS_HEADER, metrics.to_rows())?;
            info!("return {:.4} ± {:.4}", metrics.mean_return, metrics.return_se);
        }
        Command::Run => {
            let cfg = settings(g, None)?;
            let record = run_all(&cfg)?;
            for row in &record.aggregate {
                println!("{:<20} {:>12.5} ± {:.5}", row.metric, row.mean, row.stderr);
            }
        }
        Command::Experiment { figure } => {
            let cfg = settings(g, Some(figure.default_env()))?;
            match figure {
                Figure::Fig2 => {
                    run_fig2(&cfg)?;
                }
                Figure::Fig3 => {
                    run_fig3(&cfg)?;
                }
                Figure::Fig4 => {
                    run_fig4(&cfg)?;
                }
            }
            info!("wrote figure data to {}", cfg.out_dir.display());
        }
    }
    Ok(())
}

/// Reads `s,a,mean` rows into a dense table sized by the largest indices.
fn read_reward_table(path: &Path) -> Result<RewardTable<f64>, HarnessError> {
    let rows: Vec<RewardRow> = read_csv(path, REWARD_HEADER)?;
    let ns = rows.iter().map(|r| r.s + 1).max().unwrap_or(0);
    let na = rows.iter().map(|r| r.a + 1).max().unwrap_or(0);
    if rows.len() != ns * na {
        return Err(IoError::invalid(path, format!("expected {} rows for a {ns}x{na} table, got {}", ns * na, rows.len())).into());
    }
    let mut table = RewardTable::zeros(ns, na);
    for r in rows {
        table.set(r.s, r.a, r.mean);
    }
    Ok(table)
}
