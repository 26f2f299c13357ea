//! Experiment settings: per-environment defaults overlaid by a user config.
//!
//! Every hyperparameter has a named key. `env` is the only key without a
//! default; everything else falls back to the environment's table below.

use std::path::PathBuf;

use super::HarnessError;
use crate::bamdp::{BeliefKeyer, EpsilonSchedule, QConfig};
use crate::birl::{ContextWeighting, FitConfig};
use crate::config::{parse_seed_range, Config, ConfigError};
use crate::envs::{build_from_config, EnvKind, Environment};
use crate::sf::TerminalMode;

const COMMON_DEFAULTS: &str = "
gamma = 0.99
expert.trajectories = 500
irl.epsilon = 0.5
irl.max_grad_norm = 0.5
irl.alpha = 0.01
irl.target_period = 50
irl.sf_lr = 0.05
irl.beta = 1.0
irl.burn_in_fraction = 0.1
irl.convergence_tol = 1e-3
irl.ema_decay = 0.99
irl.divergence_bound = 1e6
irl.weighting = transition
irl.latent = true
irl.hessian = true
irl.log_every = 10
coe.sigma_sq = 1.0
reward.standardize = false
dqn.parallel_envs = 16
dqn.lr = 0.1
dqn.eps_start = 1.0
dqn.eps_end = 0.05
dqn.eps_fraction = 0.5
dqn.target_period = 1
dqn.belief = exact
dqn.belief_quantum = 1e-6
dqn.belief_floor = 1e-4
dqn.belief_bins = 101
eval.episodes = 10000
eval.curve_points = 20
eval.curve_episodes = 500
out = out
";

const TIGER_TREASURE_DEFAULTS: &str = "
listen_success = 0.85
horizon = 50
irl.parallel_envs = 500
irl.rollout_steps = 50
irl.updates = 5000
irl.varsigma0_sq = 100.0
irl.reward_lr = 1e-2
irl.replay_capacity = 50000
irl.batch_size = 500
irl.terminal_mode = zero_continuation
coe.r_min = -100.0
coe.r_max = 10.0
coe.kstar = 0.01
coe.sweep = -10, -5, -2, -1, -0.5, -0.1, 0, 0.01, 1
dqn.rollout_steps = 50
dqn.updates = 20000
seeds = 0..10
";

const LATENT_CHAIN_DEFAULTS: &str = "
p0 = 0.9
horizon = 100
irl.parallel_envs = 16
irl.rollout_steps = 100
irl.updates = 5000
irl.varsigma0_sq = 100.0
irl.reward_lr = 1e-2
irl.replay_capacity = 10000
irl.batch_size = 100
irl.terminal_mode = self_loop
coe.r_min = -1.0
coe.r_max = 2.0
coe.kstar = 0.0
coe.sweep = 0
dqn.rollout_steps = 100
dqn.updates = 20000
seeds = 0..8
";

const TIGER_MAZE_DEFAULTS: &str = "
horizon = 40
maze.width = 5
maze.height = 3
maze.doors = 1, 3
maze.respawn = 2, 2
maze.keep_indicator = false
irl.parallel_envs = 16
irl.rollout_steps = 40
irl.updates = 20000
irl.varsigma0_sq = 1.0
irl.reward_lr = 3e-3
irl.replay_capacity = 10000
irl.batch_size = 100
irl.terminal_mode = zero_continuation
coe.r_min = -0.05
coe.r_max = 1.0
coe.kstar = 0.01
coe.sweep = -0.05, -0.02, 0, 0.01, 0.05, 0.2, 0.5, 1
dqn.rollout_steps = 40
dqn.updates = 100000
seeds = 0..8
";

const CUSTOM_DEFAULTS: &str = "
horizon = 50
irl.parallel_envs = 16
irl.rollout_steps = 50
irl.updates = 5000
irl.varsigma0_sq = 100.0
irl.reward_lr = 1e-2
irl.replay_capacity = 10000
irl.batch_size = 100
irl.terminal_mode = self_loop
coe.r_min = -1.0
coe.r_max = 1.0
coe.kstar = 0.0
coe.sweep = 0
dqn.rollout_steps = 50
dqn.updates = 20000
seeds = 0..1
";

/// Defaults for `kind`, before any user overrides.
pub fn default_config(kind: EnvKind) -> Config {
    let specific = match kind {
        EnvKind::TigerTreasure => TIGER_TREASURE_DEFAULTS,
        EnvKind::LatentChain => LATENT_CHAIN_DEFAULTS,
        EnvKind::TigerMaze => TIGER_MAZE_DEFAULTS,
        EnvKind::Custom => CUSTOM_DEFAULTS,
    };
    let common = Config::parse(COMMON_DEFAULTS).expect("built-in defaults parse");
    let mut cfg = common.merged(&Config::parse(specific).expect("built-in defaults parse"));
    cfg.set("env", kind.name());
    cfg
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    /// Defaults merged with the user's keys; environment keys are read from here.
    pub resolved: Config,
    pub expert_trajectories: usize,
    pub expert_horizon: usize,
    pub fit: FitConfig,
    pub q: QConfig,
    pub r_min: f64,
    pub r_max: f64,
    pub kstar: f64,
    pub kstar_sweep: Vec<f64>,
    pub coe_sigma_sq: f64,
    pub standardize: bool,
    pub eval_episodes: usize,
    pub eval_horizon: usize,
    pub curve_points: usize,
    pub curve_episodes: usize,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

fn parse_enum<T>(cfg: &Config, key: &str, table: &[(&str, T)]) -> Result<T, ConfigError>
where
    T: Copy,
{
    let v: String = cfg.get(key)?;
    table
        .iter()
        .find(|(name, _)| *name == v)
        .map(|(_, t)| *t)
        .ok_or_else(|| ConfigError::BadValue { key: key.to_string(), value: v })
}

impl ExperimentConfig {
    /// Resolves `user` over the defaults of the environment named by its `env` key.
    pub fn from_config(user: &Config) -> Result<Self, HarnessError> {
        let name: String = user.get("env")?;
        let env: EnvKind = name
            .parse()
            .map_err(|_| ConfigError::BadValue { key: "env".into(), value: name.clone() })?;
        let c = default_config(env).merged(user);
        let horizon: usize = c.get("horizon")?;
        let omega0 = if c.contains("irl.omega0") { Some(c.get_list::<f64>("irl.omega0")?) } else { None };
        let clip: f64 = c.get("irl.max_grad_norm")?;
        let fit = FitConfig {
            parallel_envs: c.get("irl.parallel_envs")?,
            rollout_steps: c.get("irl.rollout_steps")?,
            updates: c.get("irl.updates")?,
            epsilon: c.get("irl.epsilon")?,
            clip: (clip > 0.0).then_some(clip),
            alpha: c.get("irl.alpha")?,
            varsigma0_sq: c.get("irl.varsigma0_sq")?,
            omega0,
            sf_lr: c.get("irl.sf_lr")?,
            reward_lr: c.get("irl.reward_lr")?,
            target_period: c.get("irl.target_period")?,
            replay_capacity: c.get("irl.replay_capacity")?,
            batch_size: c.get("irl.batch_size")?,
            beta: c.get("irl.beta")?,
            burn_in_fraction: c.get("irl.burn_in_fraction")?,
            convergence_tol: c.get("irl.convergence_tol")?,
            ema_decay: c.get("irl.ema_decay")?,
            divergence_bound: c.get("irl.divergence_bound")?,
            weighting: parse_enum(
                &c,
                "irl.weighting",
                &[("transition", ContextWeighting::Transition), ("joint", ContextWeighting::Joint)],
            )?,
            latent: c.get("irl.latent")?,
            terminal_mode: parse_enum(
                &c,
                "irl.terminal_mode",
                &[("self_loop", TerminalMode::SelfLoop), ("zero_continuation", TerminalMode::ZeroContinuation)],
            )?,
            compute_hessian: c.get("irl.hessian")?,
            log_every: c.get("irl.log_every")?,
        };
        let keyer = match c.get::<String>("dqn.belief")?.as_str() {
            "exact" => BeliefKeyer::Exact { quantum: c.get("dqn.belief_quantum")?, floor: c.get("dqn.belief_floor")? },
            "uniform" => BeliefKeyer::Uniform { bins: c.get("dqn.belief_bins")? },
            other => return Err(ConfigError::BadValue { key: "dqn.belief".into(), value: other.into() }.into()),
        };
        let q = QConfig {
            parallel_envs: c.get("dqn.parallel_envs")?,
            rollout_steps: c.get("dqn.rollout_steps")?,
            updates: c.get("dqn.updates")?,
            learning_rate: c.get("dqn.lr")?,
            epsilon: EpsilonSchedule {
                start: c.get("dqn.eps_start")?,
                end: c.get("dqn.eps_end")?,
                fraction: c.get("dqn.eps_fraction")?,
            },
            target_period: c.get("dqn.target_period")?,
            keyer,
        };
        let seeds = parse_seed_range(&c.get::<String>("seeds")?)?;
        let cfg = Self {
            env,
            expert_trajectories: c.get("expert.trajectories")?,
            expert_horizon: c.get_or("expert.horizon", horizon)?,
            fit,
            q,
            r_min: c.get("coe.r_min")?,
            r_max: c.get("coe.r_max")?,
            kstar: c.get("coe.kstar")?,
            kstar_sweep: c.get_list("coe.sweep")?,
            coe_sigma_sq: c.get("coe.sigma_sq")?,
            standardize: c.get("reward.standardize")?,
            eval_episodes: c.get("eval.episodes")?,
            eval_horizon: c.get_or("eval.horizon", horizon)?,
            curve_points: c.get("eval.curve_points")?,
            curve_episodes: c.get("eval.curve_episodes")?,
            seeds,
            out_dir: PathBuf::from(c.get::<String>("out")?),
            resolved: c,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults for `kind` with no user overrides.
    pub fn defaults(kind: EnvKind) -> Result<Self, HarnessError> {
        Self::from_config(&default_config(kind))
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let bad = |key: &str, value: String| -> HarnessError { ConfigError::BadValue { key: key.into(), value }.into() };
        if !(self.r_min < self.r_max && self.r_max > 0.0) {
            return Err(bad("coe.r_min", format!("[{}, {}] is not a valid range with r_max > 0", self.r_min, self.r_max)));
        }
        let lo = self.r_min / self.r_max;
        for &k in self.kstar_sweep.iter().chain(std::iter::once(&self.kstar)) {
            if !(lo - 1e-12..=1.0).contains(&k) {
                return Err(bad("coe.sweep", format!("{k} outside [{lo}, 1]")));
            }
        }
        if self.seeds.is_empty() {
            return Err(bad("seeds", "empty".into()));
        }
        for (key, v) in [
            ("expert.trajectories", self.expert_trajectories),
            ("expert.horizon", self.expert_horizon),
            ("irl.batch_size", self.fit.batch_size),
            ("irl.rollout_steps", self.fit.rollout_steps),
            ("dqn.rollout_steps", self.q.rollout_steps),
            ("eval.episodes", self.eval_episodes),
            ("eval.horizon", self.eval_horizon),
        ] {
            if v == 0 {
                return Err(bad(key, "0".into()));
            }
        }
        Ok(())
    }

    /// SHA-256 of the resolved key set; identifies a run's settings.
    pub fn hash(&self) -> String {
        self.resolved.hash()
    }

    pub fn build_env(&self) -> Result<Environment<f64>, HarnessError> {
        Ok(build_from_config(self.env, &self.resolved)?)
    }
}
