//! Figure sweeps. Each writes plot-ready CSVs under `cfg.out_dir`; nothing is
//! rendered here.

use std::collections::BTreeSet;

use log::info;
use rayon::prelude::*;
use serde::Serialize;

use super::pipeline::{stage_expert, stage_fit, stage_policy, stage_reward, write_settings, CurvePoint};
use super::{ExperimentConfig, HarnessError};
use crate::bamdp::EvalMetrics;
use crate::birl::posterior_predictive_reward_raw;
use crate::cmdp::RewardTable;
use crate::envs::Environment;
use crate::io::write_csv;
use crate::stats::mean_se;

const FIG2_HEADER: &[&str] = &["kstar", "seed", "success_rate", "explore_steps"];
const FIG2_SUMMARY_HEADER: &[&str] =
    &["kstar", "success_mean", "success_se", "explore_mean", "explore_se", "capped_seeds", "seeds"];
const CURVE_HEADER: &[&str] = &["policy", "seed", "step", "return", "return_se"];
const FIG3_FINAL_HEADER: &[&str] = &["policy", "seed", "return", "return_se", "reward_s1", "reward_s2"];
const FIG4_SWEEP_HEADER: &[&str] = &["variant", "kstar", "seed", "return", "first_door_correct", "explore_steps"];
const FIG4_REWARD_HEADER: &[&str] = &["seed", "s", "state", "a", "value", "provenance"];

/// Label for a missing `k*` (the IRL-only reward).
const NO_PRIOR: &str = "none";

fn kstar_label(k: Option<f64>) -> String {
    k.map_or_else(|| NO_PRIOR.to_string(), |k| k.to_string())
}

/// One (k*, seed) cell of the exploration sweep; `kstar = None` is No-Prior.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig2Row {
    pub kstar: Option<f64>,
    pub seed: u64,
    pub metrics: EvalMetrics,
}

#[derive(Serialize)]
struct Fig2CsvRow {
    kstar: String,
    seed: u64,
    success_rate: f64,
    explore_steps: f64,
}

#[derive(Serialize)]
struct Fig2SummaryRow {
    kstar: String,
    success_mean: f64,
    success_se: f64,
    explore_mean: f64,
    explore_se: f64,
    capped_seeds: usize,
    seeds: usize,
}

/// One reward fit per seed, then a policy per `k*` in the sweep plus No-Prior.
pub fn run_fig2(cfg: &ExperimentConfig) -> Result<Vec<Fig2Row>, HarnessError> {
    let env = cfg.build_env()?;
    let mut kstars: Vec<Option<f64>> = cfg.kstar_sweep.iter().copied().map(Some).collect();
    kstars.push(None);
    let per_seed = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let raw = fitted_reward(cfg, &env, seed, true)?;
            kstars
                .iter()
                .map(|&k| {
                    let reward = stage_reward(cfg, &raw, &env.coe_set, k)?;
                    let out = stage_policy(cfg, &env, &reward.table, seed, false)?;
                    info!("fig2 seed {seed} k* {}: success {:.3}", kstar_label(k), out.metrics.success_rate);
                    Ok(Fig2Row { kstar: k, seed, metrics: out.metrics })
                })
                .collect::<Result<Vec<_>, HarnessError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<Fig2Row> = per_seed.into_iter().flatten().collect();

    write_csv(
        cfg.out_dir.join("fig2.csv"),
        FIG2_HEADER,
        rows.iter().map(|r| Fig2CsvRow {
            kstar: kstar_label(r.kstar),
            seed: r.seed,
            success_rate: r.metrics.success_rate,
            explore_steps: r.metrics.explore_steps,
        }),
    )?;
    let summary = kstars.iter().map(|&k| {
        let cell: Vec<&Fig2Row> = rows.iter().filter(|r| r.kstar == k).collect();
        let (success_mean, success_se) = mean_se(&cell.iter().map(|r| r.metrics.success_rate).collect::<Vec<_>>());
        let (explore_mean, explore_se) = mean_se(&cell.iter().map(|r| r.metrics.explore_steps).collect::<Vec<_>>());
        Fig2SummaryRow {
            kstar: kstar_label(k),
            success_mean,
            success_se,
            explore_mean,
            explore_se,
            capped_seeds: cell.iter().filter(|r| r.metrics.horizon_capped()).count(),
            seeds: cell.len(),
        }
    });
    write_csv(cfg.out_dir.join("fig2_summary.csv"), FIG2_SUMMARY_HEADER, summary)?;
    write_settings(cfg)?;
    Ok(rows)
}

/// True-reward return of one policy at one training step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnCurveRow {
    pub policy: String,
    pub seed: u64,
    pub step: usize,
    #[serde(rename = "return")]
    pub mean_return: f64,
    pub return_se: f64,
}

impl ReturnCurveRow {
    fn from_curve(policy: &str, seed: u64, curve: &[CurvePoint]) -> Vec<Self> {
        curve
            .iter()
            .map(|p| Self {
                policy: policy.to_string(),
                seed,
                step: p.step,
                mean_return: p.mean_return,
                return_se: p.return_se,
            })
            .collect()
    }
}

/// Final evaluation of one latent-chain policy. The learned rewards of the
/// two critical states are recorded for IRL policies (`None` for ground truth).
#[derive(Debug, Clone, PartialEq)]
pub struct Fig3Row {
    pub policy: String,
    pub seed: u64,
    pub metrics: EvalMetrics,
    pub reward_s1: Option<f64>,
    pub reward_s2: Option<f64>,
}

#[derive(Serialize)]
struct Fig3FinalCsvRow {
    policy: String,
    seed: u64,
    #[serde(rename = "return")]
    mean_return: f64,
    return_se: f64,
    reward_s1: Option<f64>,
    reward_s2: Option<f64>,
}

/// Critical latent-chain states whose learned ordering is checked.
const CHAIN_S1: usize = 1;
const CHAIN_S2: usize = 2;

/// Ground-truth, latent-IRL and context-blind-IRL policies per seed, with
/// return curves in `fig3.csv` and final rows in `fig3_final.csv`. Setting
/// `fig3.diagnostic = true` repeats the sweep with a uniform context prior
/// into `fig3_diagnostic/`.
pub fn run_fig3(cfg: &ExperimentConfig) -> Result<(Vec<Fig3Row>, Vec<ReturnCurveRow>), HarnessError> {
    let result = fig3_sweep(cfg)?;
    if cfg.resolved.get_or("fig3.diagnostic", false)? {
        let mut diag = cfg.clone();
        diag.resolved.set("p0", 0.5);
        diag.out_dir = cfg.out_dir.join("fig3_diagnostic");
        fig3_sweep(&diag)?;
    }
    Ok(result)
}

fn fig3_sweep(cfg: &ExperimentConfig) -> Result<(Vec<Fig3Row>, Vec<ReturnCurveRow>), HarnessError> {
    let env = cfg.build_env()?;
    let per_seed = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let mut rows = Vec::new();
            let mut curves = Vec::new();
            let gt = stage_policy(cfg, &env, &env.true_reward(), seed, true)?;
            curves.extend(ReturnCurveRow::from_curve("ground_truth", seed, &gt.curve));
            rows.push(Fig3Row { policy: "ground_truth".into(), seed, metrics: gt.metrics, reward_s1: None, reward_s2: None });
            for (name, latent) in [("latent", true), ("no_latent", false)] {
                let raw = fitted_reward(cfg, &env, seed, latent)?;
                let reward = stage_reward(cfg, &raw, &env.coe_set, Some(cfg.kstar))?;
                let out = stage_policy(cfg, &env, &reward.table, seed, true)?;
                info!(
                    "fig3 seed {seed} {name}: r(s1) {:.4} r(s2) {:.4} return {:.3}",
                    raw.get(CHAIN_S1, 0),
                    raw.get(CHAIN_S2, 0),
                    out.metrics.mean_return
                );
                curves.extend(ReturnCurveRow::from_curve(name, seed, &out.curve));
                rows.push(Fig3Row {
                    policy: name.into(),
                    seed,
                    metrics: out.metrics,
                    reward_s1: Some(raw.get(CHAIN_S1, 0)),
                    reward_s2: Some(raw.get(CHAIN_S2, 0)),
                });
            }
            Ok((rows, curves))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let (rows, curves): (Vec<Vec<Fig3Row>>, Vec<Vec<ReturnCurveRow>>) = per_seed.into_iter().unzip();
    let rows: Vec<Fig3Row> = rows.into_iter().flatten().collect();
    let curves: Vec<ReturnCurveRow> = curves.into_iter().flatten().collect();
    write_csv(cfg.out_dir.join("fig3.csv"), CURVE_HEADER, curves.iter())?;
    write_csv(
        cfg.out_dir.join("fig3_final.csv"),
        FIG3_FINAL_HEADER,
        rows.iter().map(|r| Fig3FinalCsvRow {
            policy: r.policy.clone(),
            seed: r.seed,
            mean_return: r.metrics.mean_return,
            return_se: r.metrics.return_se,
            reward_s1: r.reward_s1,
            reward_s2: r.reward_s2,
        }),
    )?;
    write_settings(cfg)?;
    Ok((rows, curves))
}

/// One policy's final evaluation in the maze. `variant` is `ground_truth`,
/// `irl` or `irl_coe`; `kstar` is set for `irl_coe` only.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig4SweepRow {
    pub variant: String,
    pub kstar: Option<f64>,
    pub seed: u64,
    pub metrics: EvalMetrics,
}

#[derive(Serialize)]
struct Fig4SweepCsvRow {
    variant: String,
    kstar: String,
    seed: u64,
    #[serde(rename = "return")]
    mean_return: f64,
    first_door_correct: f64,
    explore_steps: f64,
}

#[derive(Serialize)]
struct Fig4RewardCsvRow<'a> {
    seed: u64,
    s: usize,
    state: &'a str,
    a: usize,
    value: f64,
    provenance: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig4Outcome {
    /// Curves for `ground_truth`, `irl` and `irl_coe` at the default k*.
    pub curves: Vec<ReturnCurveRow>,
    /// The three curve policies' final rows followed by the k* sweep.
    pub sweep: Vec<Fig4SweepRow>,
}

impl Fig4Outcome {
    /// Rows of `variant` at `kstar`, one per seed.
    pub fn cell(&self, variant: &str, kstar: Option<f64>) -> Vec<&Fig4SweepRow> {
        self.sweep.iter().filter(|r| r.variant == variant && r.kstar == kstar).collect()
    }
}

/// Maze pipeline: return curves for the three rewards at the default k*, then
/// final returns across the k* sweep. The refined reward at the default k*
/// is dumped per seed to `fig4_reward.csv`.
pub fn run_fig4(cfg: &ExperimentConfig) -> Result<Fig4Outcome, HarnessError> {
    let env = cfg.build_env()?;
    let per_seed = cfg
        .seeds
        .par_iter()
        .map(|&seed| fig4_seed(cfg, &env, seed))
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let mut curves = Vec::new();
    let mut sweep = Vec::new();
    let mut reward_rows = Vec::new();
    for (c, s, r) in per_seed {
        curves.extend(c);
        sweep.extend(s);
        reward_rows.extend(r);
    }
    write_csv(cfg.out_dir.join("fig4_curves.csv"), CURVE_HEADER, curves.iter())?;
    write_csv(
        cfg.out_dir.join("fig4_sweep.csv"),
        FIG4_SWEEP_HEADER,
        sweep.iter().map(|r| Fig4SweepCsvRow {
            variant: r.variant.clone(),
            kstar: kstar_label(r.kstar),
            seed: r.seed,
            mean_return: r.metrics.mean_return,
            first_door_correct: r.metrics.first_door_correct,
            explore_steps: r.metrics.explore_steps,
        }),
    )?;
    write_csv(
        cfg.out_dir.join("fig4_reward.csv"),
        FIG4_REWARD_HEADER,
        reward_rows.iter().map(|(seed, row)| Fig4RewardCsvRow {
            seed: *seed,
            s: row.s,
            state: &env.state_names[row.s],
            a: row.a,
            value: row.value,
            provenance: row.provenance.clone(),
        }),
    )?;
    write_settings(cfg)?;
    Ok(Fig4Outcome { curves, sweep })
}

type Fig4Seed = (Vec<ReturnCurveRow>, Vec<Fig4SweepRow>, Vec<(u64, crate::io::FinalRewardRow)>);

fn fig4_seed(cfg: &ExperimentConfig, env: &Environment<f64>, seed: u64) -> Result<Fig4Seed, HarnessError> {
    let raw = fitted_reward(cfg, env, seed, cfg.fit.latent)?;
    let coe = stage_reward(cfg, &raw, &env.coe_set, Some(cfg.kstar))?;
    let irl_only = stage_reward(cfg, &raw, &env.coe_set, None)?;
    let rewards = [
        ("ground_truth", None, env.true_reward()),
        ("irl", None, irl_only.table),
        ("irl_coe", Some(cfg.kstar), coe.table.clone()),
    ];
    let mut curves = Vec::new();
    let mut sweep = Vec::new();
    for (variant, kstar, reward) in rewards {
        let out = stage_policy(cfg, env, &reward, seed, true)?;
        info!("fig4 seed {seed} {variant}: return {:.3}", out.metrics.mean_return);
        curves.extend(ReturnCurveRow::from_curve(variant, seed, &out.curve));
        sweep.push(Fig4SweepRow { variant: variant.into(), kstar, seed, metrics: out.metrics });
    }
    // the default k* already has a row from the curve run
    let mut done = BTreeSet::from([cfg.kstar.to_bits()]);
    for &k in &cfg.kstar_sweep {
        if !done.insert(k.to_bits()) {
            continue;
        }
        let reward = stage_reward(cfg, &raw, &env.coe_set, Some(k))?;
        let out = stage_policy(cfg, env, &reward.table, seed, false)?;
        info!("fig4 seed {seed} k* {k}: return {:.3}", out.metrics.mean_return);
        sweep.push(Fig4SweepRow { variant: "irl_coe".into(), kstar: Some(k), seed, metrics: out.metrics });
    }
    let rewards = coe.to_rows().into_iter().map(|r| (seed, r)).collect();
    Ok((curves, sweep, rewards))
}

/// Expert data and reward fit for one seed, returning the raw (unscaled)
/// posterior-mean reward.
fn fitted_reward(
    cfg: &ExperimentConfig,
    env: &Environment<f64>,
    seed: u64,
    latent: bool,
) -> Result<RewardTable<f64>, HarnessError> {
    let data = stage_expert(cfg, env, seed)?;
    let fit_cfg = crate::birl::FitConfig { latent, ..cfg.fit.clone() };
    let fit = stage_fit(env, &data.trajectories, &fit_cfg, seed)?;
    Ok(posterior_predictive_reward_raw(&fit.result, &env.mdp)?)
}
