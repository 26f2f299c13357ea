//! The interleaved successor-feature and reward loop: simulate episodes,
//! store them, update successor features from expert and replayed
//! trajectories, then step `omega`.

use std::collections::VecDeque;

use log::debug;

use super::{
    map_gradient_step, neg_hessian, weigh_trajectories, BirlError, ContextWeighting, LaplaceResult, RewardParams,
    WeightedTrajectory,
};
use crate::bamdp::BeliefState;
use crate::cmdp::{ContextualMdp, Trajectory};
use crate::io::FitLogRow;
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::sf::{SuccessorTable, TerminalMode};

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Simulated episodes collected per update.
    pub parallel_envs: usize,
    /// Simulated episode length before truncation.
    pub rollout_steps: usize,
    pub updates: usize,
    /// Fixed exploration rate of the simulator policy.
    pub epsilon: f64,
    /// Gradient-norm clip applied to the `omega` step.
    pub clip: Option<f64>,
    pub alpha: f64,
    /// Prior variance on the update's scale, `sigma0_sq / alpha`.
    pub varsigma0_sq: f64,
    /// Prior mean; zero when `None`.
    pub omega0: Option<Vec<f64>>,
    pub sf_lr: f64,
    pub reward_lr: f64,
    pub target_period: usize,
    /// Simulated episodes kept in the replay buffer.
    pub replay_capacity: usize,
    /// Trajectories per `omega` step and per expert and simulator SF pass.
    pub batch_size: usize,
    /// Weight of simulator updates relative to expert updates.
    pub beta: f64,
    /// Leading fraction of updates that train successor features on expert data only.
    pub burn_in_fraction: f64,
    pub convergence_tol: f64,
    pub ema_decay: f64,
    pub divergence_bound: f64,
    pub weighting: ContextWeighting,
    /// Infer contexts from each trajectory; when false every trajectory is
    /// attributed to the prior mode.
    pub latent: bool,
    pub terminal_mode: TerminalMode,
    pub compute_hessian: bool,
    /// Fit-log period in updates (0 disables the log).
    pub log_every: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            parallel_envs: 500,
            rollout_steps: 50,
            updates: 5000,
            epsilon: 0.5,
            clip: Some(0.5),
            alpha: 0.01,
            varsigma0_sq: 100.0,
            omega0: None,
            sf_lr: 1e-3,
            reward_lr: 1e-2,
            target_period: 50,
            replay_capacity: 50_000,
            batch_size: 500,
            beta: 1.0,
            burn_in_fraction: 0.1,
            convergence_tol: 1e-3,
            ema_decay: 0.99,
            divergence_bound: 1e6,
            weighting: ContextWeighting::Transition,
            latent: true,
            terminal_mode: TerminalMode::SelfLoop,
            compute_hessian: true,
            log_every: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitOutput<F> {
    pub result: LaplaceResult<F>,
    pub table: SuccessorTable<F>,
    pub params: RewardParams<F>,
    pub data: Vec<WeightedTrajectory<F>>,
    pub log: Vec<FitLogRow>,
}

/// A simulated episode and the context posterior at its end.
#[derive(Debug, Clone)]
struct SimEpisode<F> {
    transitions: Vec<(usize, usize, usize)>,
    weights: Vec<F>,
}

/// Expert SF pass over a batch of trajectories, each context weighted by
/// the trajectory's posterior.
fn expert_sf_pass<F: Scalar>(
    mdp: &ContextualMdp<F>,
    table: &mut SuccessorTable<F>,
    data: &[WeightedTrajectory<F>],
    batch: &[usize],
) -> Result<(), BirlError> {
    for &i in batch {
        let traj = &data[i];
        for (s, a, sn, an) in traj.transitions() {
            for (theta, &w) in traj.context_weights.iter().enumerate() {
                if w > F::zero() {
                    table.expert_td_update(mdp, s, a, sn, an, theta, w)?;
                }
            }
        }
    }
    Ok(())
}

/// One simulated episode of at most `steps` steps: epsilon-greedy under a
/// context drawn from the running belief at every step (the prior mode when
/// not latent). Weights are the final posterior, or one-hot on the mode.
fn simulate_episode<F: Scalar>(
    mdp: &ContextualMdp<F>,
    table: &SuccessorTable<F>,
    omega: &[F],
    cfg: &FitConfig,
    rng: &mut RngStream,
) -> Result<SimEpisode<F>, BirlError> {
    let na = mdp.num_actions();
    let mode = mdp.prior_mode();
    let theta = mdp.sample_context(rng);
    let mut s = mdp.sample_initial(rng);
    let mut belief = BeliefState::from_prior(mdp);
    let mut transitions = Vec::with_capacity(cfg.rollout_steps);
    for _ in 0..cfg.rollout_steps {
        let ctx = if cfg.latent { belief.sample(rng) } else { mode };
        let a = if rng.uniform() < cfg.epsilon { rng.below(na) } else { table.greedy_action(s, ctx, omega) };
        let sn = mdp.sample_next(s, a, theta, rng);
        belief.update(mdp, s, a, sn)?;
        transitions.push((s, a, sn));
        s = sn;
        if mdp.is_terminal(sn) {
            break;
        }
    }
    let weights = if cfg.latent {
        belief.probs()
    } else {
        let mut v = vec![F::zero(); mdp.num_contexts()];
        v[mode] = F::one();
        v
    };
    Ok(SimEpisode { transitions, weights })
}

/// Runs the interleaved fit for `cfg.updates` steps or until the smoothed
/// gradient norm `||g|| / N` falls below `cfg.convergence_tol`.
///
/// Replayed episodes carry their final context posterior. Since
/// the simulator policy sees only the history, weighting by that posterior
/// gives each context slice exactly the trajectory distribution it would
/// see if the context were known.
pub fn fit_map<F: Scalar>(
    mdp: &ContextualMdp<F>,
    expert: &[Trajectory],
    cfg: &FitConfig,
    rng: &mut RngStream,
) -> Result<FitOutput<F>, BirlError> {
    if expert.is_empty() {
        return Err(BirlError::InvalidParams("no expert trajectories".into()));
    }
    if !(0.0..=1.0).contains(&cfg.epsilon) || !(0.0..=1.0).contains(&cfg.burn_in_fraction) {
        return Err(BirlError::InvalidParams("epsilon and burn_in_fraction must lie in [0, 1]".into()));
    }
    if cfg.sf_lr < 0.0 || cfg.beta < 0.0 {
        return Err(BirlError::InvalidParams("sf_lr and beta must be nonnegative".into()));
    }
    let d = mdp.feature_dim();
    let data = weigh_trajectories(mdp, expert, cfg.latent)?;
    let n = data.len();
    let mut params = RewardParams::new(d, F::lit(cfg.alpha), F::lit(cfg.varsigma0_sq), F::lit(cfg.reward_lr))?;
    if let Some(w0) = &cfg.omega0 {
        if w0.len() != d {
            return Err(BirlError::DimensionMismatch { expected: d, got: w0.len() });
        }
        params.omega0 = w0.iter().map(|&x| F::lit(x)).collect();
        params.omega = params.omega0.clone();
    }
    let mut table = SuccessorTable::new(mdp, F::lit(cfg.sf_lr), cfg.target_period.max(1), cfg.terminal_mode);
    let clip = cfg.clip.map(F::lit);
    let beta = F::lit(cfg.beta);
    let burn_in = (cfg.burn_in_fraction * cfg.updates as f64).round() as usize;

    let mut replay: VecDeque<SimEpisode<F>> = VecDeque::with_capacity(cfg.replay_capacity.min(1 << 16));
    let mut log = Vec::new();
    let mut ema: Option<f64> = None;
    let mut last_norm = f64::INFINITY;
    let mut converged = false;
    let mut steps = 0;

    for step in 0..cfg.updates {
        steps = step + 1;
        let batch = rng.sample_indices(n, cfg.batch_size);
        expert_sf_pass(mdp, &mut table, &data, &batch)?;
        if step < burn_in {
            table.tick();
            continue;
        }

        for _ in 0..cfg.parallel_envs {
            if replay.len() >= cfg.replay_capacity {
                replay.pop_front();
            }
            replay.push_back(simulate_episode(mdp, &table, &params.omega, cfg, rng)?);
        }

        if !replay.is_empty() && beta > F::zero() {
            for _ in 0..cfg.batch_size {
                let ep = &replay[rng.below(replay.len())];
                for &(s, a, s_next) in &ep.transitions {
                    for (theta, &wt) in ep.weights.iter().enumerate() {
                        if wt > F::zero() {
                            table.simulator_td_update(mdp, s, a, s_next, theta, &params.omega, beta * wt)?;
                        }
                    }
                }
            }
        }

        let omega_batch = rng.sample_indices(n, cfg.batch_size);
        let st = map_gradient_step(&table, &data, &omega_batch, n, &params, cfg.weighting, clip)?;
        let gn = st.grad_norm.as_f64() / n as f64;
        if !gn.is_finite() || gn > cfg.divergence_bound || st.omega.iter().any(|x| !x.is_finite()) {
            return Err(BirlError::Diverged { step, grad_norm: gn });
        }
        params.omega = st.omega;
        last_norm = gn;
        let e = match ema {
            None => gn,
            Some(prev) => cfg.ema_decay * prev + (1.0 - cfg.ema_decay) * gn,
        };
        ema = Some(e);
        table.tick();
        if cfg.log_every > 0 && (step % cfg.log_every == 0 || step + 1 == cfg.updates) {
            log.push(FitLogRow { step, grad_norm: gn, loglik: st.loglik.as_f64() });
        }
        if e < cfg.convergence_tol {
            debug!("reward fit converged at step {step} (smoothed grad norm {e:.3e})");
            converged = true;
            if cfg.log_every > 0 && log.last().map(|r| r.step) != Some(step) {
                log.push(FitLogRow { step, grad_norm: gn, loglik: st.loglik.as_f64() });
            }
            break;
        }
    }
    if !table.is_finite() {
        return Err(BirlError::Diverged { step: steps, grad_norm: f64::NAN });
    }
    let neg_h = if cfg.compute_hessian { Some(neg_hessian(&table, &data, &params)?) } else { None };
    Ok(FitOutput {
        result: LaplaceResult { omega_map: params.omega.clone(), neg_hessian: neg_h, converged, final_grad_norm: last_norm, steps },
        table,
        params,
        data,
        log,
    })
}
