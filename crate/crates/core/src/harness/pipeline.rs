//! The per-seed pipeline and its stages. Each stage draws from its own fork
//! of the seed's stream, so stages can be rerun independently.

use std::collections::BTreeMap;
use std::path::Path;

use log::info;
use rayon::prelude::*;

use super::{ExperimentConfig, HarnessError};
use crate::bamdp::{evaluate_policy, reachable_beliefs, train_bayes_policy, BeliefKeyer, EvalMetrics, QTable};
use crate::birl::{fit_map, posterior_predictive_reward_raw, FitConfig, FitOutput};
use crate::cmdp::{RewardTable, Trajectory};
use crate::envs::{generate_expert_dataset, Environment, ExpertDataset};
use crate::io::{
    read_csv, write_csv, ContextRow, ExpertRow, IoError, MetricRow, OmegaRow, RewardRow, CONTEXTS_HEADER,
    EXPERT_HEADER, FINAL_REWARD_HEADER, FIT_LOG_HEADER, METRICS_HEADER, OMEGA_HEADER, QTABLE_HEADER, REWARD_HEADER,
    SF_HEADER,
};
use crate::reward::{apply_coe, normalize_for_training, rescale_or_floor, CoeSpec, KPrior, PredictiveReward};
use crate::rng::RngStream;
use crate::stats::mean_se;

const STREAM_EXPERT: u64 = 1;
const STREAM_FIT: u64 = 2;
const STREAM_POLICY: u64 = 3;
const STREAM_EVAL: u64 = 4;
const STREAM_CURVE: u64 = 5;

pub fn stage_expert(cfg: &ExperimentConfig, env: &Environment<f64>, seed: u64) -> Result<ExpertDataset, HarnessError> {
    let mut rng = RngStream::new(seed).fork(STREAM_EXPERT);
    generate_expert_dataset(env, cfg.expert_trajectories, cfg.expert_horizon, &mut rng).map_err(HarnessError::Expert)
}

/// Fits the reward with `fit` (usually `cfg.fit`, or a variant of it).
pub fn stage_fit(
    env: &Environment<f64>,
    expert: &[Trajectory],
    fit: &FitConfig,
    seed: u64,
) -> Result<FitOutput<f64>, HarnessError> {
    let mut rng = RngStream::new(seed).fork(STREAM_FIT);
    Ok(fit_map(&env.mdp, expert, fit, &mut rng)?)
}

/// Rescales the raw IRL table into `[r_min, r_max]` and writes `k * r_max`
/// on the exploration cells. `kstar = None` gives the IRL-only reward.
pub fn stage_reward(
    cfg: &ExperimentConfig,
    raw: &RewardTable<f64>,
    coe_cells: &[(usize, usize)],
    kstar: Option<f64>,
) -> Result<PredictiveReward<f64>, HarnessError> {
    let scaled = rescale_or_floor(raw, cfg.r_min, cfg.r_max)?;
    let mut spec = match kstar {
        Some(k) if !coe_cells.is_empty() => CoeSpec::shared(coe_cells, KPrior::Point(k), cfg.r_min, cfg.r_max)?,
        _ => CoeSpec::disabled(cfg.r_min, cfg.r_max),
    };
    spec.sigma_sq = cfg.coe_sigma_sq;
    Ok(apply_coe(&scaled, &spec)?)
}

/// True-reward return of a policy snapshot during training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub step: usize,
    pub mean_return: f64,
    pub return_se: f64,
}

#[derive(Debug, Clone)]
pub struct PolicyOutcome {
    pub table: QTable<f64>,
    /// Evaluated under the environment's true reward.
    pub metrics: EvalMetrics,
    pub curve: Vec<CurvePoint>,
}

/// Normalizes `reward`, learns a belief-conditioned policy on it and scores
/// the policy under the true reward. With `curve`, snapshots are scored
/// `cfg.curve_points` times during training.
pub fn stage_policy(
    cfg: &ExperimentConfig,
    env: &Environment<f64>,
    reward: &RewardTable<f64>,
    seed: u64,
    curve: bool,
) -> Result<PolicyOutcome, HarnessError> {
    if let BeliefKeyer::Uniform { .. } = cfg.q.keyer {
        // binned beliefs must still separate every belief the rollouts can reach
        let reachable = reachable_beliefs(&env.mdp, cfg.q.rollout_steps)?;
        cfg.q.keyer.check_injective(&reachable, 1e-6)?;
    }
    let train = normalize_for_training(reward, cfg.standardize)?;
    let truth = env.true_reward();
    let root = RngStream::new(seed);
    let mut rng = root.fork(STREAM_POLICY);
    let mut curve_rng = root.fork(STREAM_CURVE);
    let every = if curve && cfg.curve_points > 0 { (cfg.q.updates / cfg.curve_points).max(1) } else { 0 };
    let mut points = Vec::new();
    let mut curve_err = None;
    let table = train_bayes_policy(&env.mdp, &train, &cfg.q, &mut rng, every, |step, q| {
        match evaluate_policy(env, &mut &*q, &truth, cfg.curve_episodes, cfg.eval_horizon, &mut curve_rng) {
            Ok(m) => points.push(CurvePoint { step, mean_return: m.mean_return, return_se: m.return_se }),
            Err(e) => curve_err = Some(e),
        }
    })?;
    if let Some(e) = curve_err {
        return Err(e.into());
    }
    let mut eval_rng = root.fork(STREAM_EVAL);
    let metrics = evaluate_policy(env, &mut &table, &truth, cfg.eval_episodes, cfg.eval_horizon, &mut eval_rng)?;
    if curve {
        points.push(CurvePoint { step: cfg.q.updates, mean_return: metrics.mean_return, return_se: metrics.return_se });
    }
    Ok(PolicyOutcome { table, metrics, curve: points })
}

/// Writes `expert.csv` and `contexts.csv` (hidden contexts, for analysis only).
pub fn write_expert(dir: &Path, data: &ExpertDataset) -> Result<(), HarnessError> {
    let rows = data.trajectories.iter().enumerate().flat_map(|(i, tr)| {
        tr.transitions().enumerate().map(move |(t, (s, a, s_next))| ExpertRow { traj: i, t, s, a, s_next })
    });
    write_csv(dir.join("expert.csv"), EXPERT_HEADER, rows)?;
    let ctx = data.hidden_contexts.iter().enumerate().map(|(traj, &theta)| ContextRow { traj, theta });
    write_csv(dir.join("contexts.csv"), CONTEXTS_HEADER, ctx)?;
    Ok(())
}

/// Reads trajectories written by [`write_expert`]; row order is irrelevant.
pub fn read_expert(path: &Path) -> Result<Vec<Trajectory>, HarnessError> {
    let rows: Vec<ExpertRow> = read_csv(path, EXPERT_HEADER)?;
    let mut by_traj: BTreeMap<usize, Vec<ExpertRow>> = BTreeMap::new();
    for r in rows {
        by_traj.entry(r.traj).or_default().push(r);
    }
    let mut out = Vec::with_capacity(by_traj.len());
    for (id, mut steps) in by_traj {
        steps.sort_by_key(|r| r.t);
        for (t, pair) in steps.windows(2).enumerate() {
            if pair[0].s_next != pair[1].s || pair[1].t != pair[0].t + 1 {
                return Err(IoError::invalid(path, format!("trajectory {id} breaks at step {}", t + 1)).into());
            }
        }
        let last = steps.last().map(|r| r.s_next).unwrap_or(0);
        let traj = Trajectory::new(steps.iter().map(|r| (r.s, r.a)).collect(), last)
            .map_err(|e| IoError::invalid(path, format!("trajectory {id}: {e}")))?;
        out.push(traj);
    }
    if out.is_empty() {
        return Err(IoError::invalid(path, "no trajectories").into());
    }
    Ok(out)
}

/// Writes `omega_map.csv`, `reward_table.csv`, `fit_log.csv` and `sf.csv`.
pub fn write_fit(dir: &Path, fit: &FitOutput<f64>, raw: &RewardTable<f64>) -> Result<(), HarnessError> {
    let omega = fit.result.omega_map.iter().enumerate().map(|(dim, &value)| OmegaRow { dim, value });
    write_csv(dir.join("omega_map.csv"), OMEGA_HEADER, omega)?;
    let na = raw.num_actions();
    let table = (0..raw.num_states())
        .flat_map(|s| (0..na).map(move |a| (s, a)))
        .map(|(s, a)| RewardRow { s, a, mean: raw.get(s, a) });
    write_csv(dir.join("reward_table.csv"), REWARD_HEADER, table)?;
    write_csv(dir.join("fit_log.csv"), FIT_LOG_HEADER, fit.log.iter().copied())?;
    write_csv(dir.join("sf.csv"), SF_HEADER, fit.table.to_rows())?;
    Ok(())
}

/// Per-seed metrics and their across-seed aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config_hash: String,
    pub per_seed: Vec<(u64, EvalMetrics)>,
    /// `(metric, mean, stderr)` with stderr = sample std / sqrt(n_seeds).
    pub aggregate: Vec<MetricRow>,
}

impl RunRecord {
    pub fn from_seeds(config_hash: String, mut per_seed: Vec<(u64, EvalMetrics)>) -> Self {
        per_seed.sort_by_key(|(s, _)| *s);
        let mut aggregate = Vec::new();
        if let Some((_, first)) = per_seed.first() {
            for (i, row) in first.to_rows().iter().enumerate() {
                let xs: Vec<f64> = per_seed.iter().map(|(_, m)| m.to_rows()[i].mean).collect();
                let (mean, stderr) = mean_se(&xs);
                aggregate.push(MetricRow { metric: row.metric.clone(), mean, stderr });
            }
        }
        Self { config_hash, per_seed, aggregate }
    }
}

/// The full pipeline for one seed, writing every intermediate file under
/// `<out>/seed_<seed>/`.
pub fn run_pipeline(cfg: &ExperimentConfig, seed: u64) -> Result<EvalMetrics, HarnessError> {
    let dir = cfg.out_dir.join(format!("seed_{seed}"));
    let env = cfg.build_env()?;
    let data = stage_expert(cfg, &env, seed)?;
    write_expert(&dir, &data)?;
    let fit = stage_fit(&env, &data.trajectories, &cfg.fit, seed)?;
    info!("seed {seed}: reward fit took {} steps (converged: {})", fit.result.steps, fit.result.converged);
    let raw = posterior_predictive_reward_raw(&fit.result, &env.mdp)?;
    write_fit(&dir, &fit, &raw)?;
    let reward = stage_reward(cfg, &raw, &env.coe_set, Some(cfg.kstar))?;
    write_csv(dir.join("reward_final.csv"), FINAL_REWARD_HEADER, reward.to_rows())?;
    let outcome = stage_policy(cfg, &env, &reward.table, seed, false)?;
    write_csv(dir.join("qtable.csv"), QTABLE_HEADER, outcome.table.to_rows())?;
    write_csv(dir.join("metrics.csv"), METRICS_HEADER, outcome.metrics.to_rows())?;
    Ok(outcome.metrics)
}

/// Runs [`run_pipeline`] for every configured seed in parallel and writes
/// `summary.csv` and the resolved settings (`run.cfg`) under `<out>`.
pub fn run_all(cfg: &ExperimentConfig) -> Result<RunRecord, HarnessError> {
    let per_seed = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_pipeline(cfg, seed).map(|m| (seed, m)))
        .collect::<Result<Vec<_>, _>>()?;
    let record = RunRecord::from_seeds(cfg.hash(), per_seed);
    write_csv(cfg.out_dir.join("summary.csv"), METRICS_HEADER, record.aggregate.iter().cloned())?;
    write_settings(cfg)?;
    Ok(record)
}

pub(super) fn write_settings(cfg: &ExperimentConfig) -> Result<(), HarnessError> {
    let path = cfg.out_dir.join("run.cfg");
    let text = format!("# settings hash {}\n{}", cfg.hash(), cfg.resolved.canonical().replace('=', " = "));
    std::fs::create_dir_all(&cfg.out_dir)
        .and_then(|_| std::fs::write(&path, text))
        .map_err(|source| IoError::Io { path: path.display().to_string(), source })?;
    Ok(())
}
