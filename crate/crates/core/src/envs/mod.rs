//! Environment constructors, expert policies and expert datasets.

mod counterexamples;
mod latent_chain;
mod tiger_maze;
mod tiger_treasure;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use counterexamples::{build_choice_counterexample, build_three_state, ChoiceCounterexampleSpec};
pub use latent_chain::{build_latent_chain, LatentChainSpec};
pub use tiger_maze::{build_tiger_maze, MazeLayout, TigerMazeSpec, MAZE_DOWN, MAZE_LEFT, MAZE_LISTEN, MAZE_RIGHT, MAZE_UP};
pub use tiger_treasure::{
    build_tiger_treasure, TigerTreasureSpec, GOLD, LISTEN, OPEN_1, OPEN_2, S0, S_T, T1, T2, TIGER,
};

use crate::cmdp::{sample_rollout, CmdpError, ContextualMdp, RewardTable, TabularPolicy, Trajectory};
use crate::cmdp::CmdpBuilder;
use crate::config::{Config, ConfigError};
use crate::io::{read_csv, IoError, TransitionRow, TRANSITION_HEADER};
use crate::planning::value_iteration;
use crate::rng::RngStream;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid environment spec: {0}")]
    InvalidSpec(String),
    #[error("unknown environment `{0}` (expected tiger_treasure, latent_chain, tiger_maze or custom)")]
    UnknownEnv(String),
    #[error(transparent)]
    Cmdp(#[from] CmdpError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    TigerTreasure,
    LatentChain,
    TigerMaze,
    /// Small analytic environments used by tests.
    Custom,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::TigerTreasure => "tiger_treasure",
            EnvKind::LatentChain => "latent_chain",
            EnvKind::TigerMaze => "tiger_maze",
            EnvKind::Custom => "custom",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = EnvError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tiger_treasure" => Ok(EnvKind::TigerTreasure),
            "latent_chain" => Ok(EnvKind::LatentChain),
            "tiger_maze" => Ok(EnvKind::TigerMaze),
            "custom" => Ok(EnvKind::Custom),
            other => Err(EnvError::UnknownEnv(other.to_string())),
        }
    }
}

/// A CMDP together with its ground-truth reward and evaluation metadata.
#[derive(Debug, Clone)]
pub struct Environment<F> {
    pub kind: EnvKind,
    pub mdp: ContextualMdp<F>,
    /// Ground-truth reward weights over the one-hot state features.
    pub true_omega: Vec<F>,
    pub state_names: Vec<String>,
    pub action_names: Vec<String>,
    /// Default exploration set for the cost-of-exploration prior.
    pub coe_set: Vec<(usize, usize)>,
    /// Default rollout length.
    pub horizon: usize,
    /// Action counted as exploration time.
    pub listen_action: Option<usize>,
    /// States whose first visit decides success (`gold`) or failure (`tiger`).
    pub gold_states: Vec<usize>,
    pub tiger_states: Vec<usize>,
    pub maze: Option<MazeLayout>,
}

impl<F: Scalar> Environment<F> {
    pub fn true_reward(&self) -> RewardTable<F> {
        RewardTable::from_weights(&self.mdp, &self.true_omega).expect("true omega matches feature dim")
    }
}

/// Builds a registered environment from config keys (see the shipped configs).
pub fn build_from_config<F: Scalar>(kind: EnvKind, cfg: &Config) -> Result<Environment<F>, EnvError> {
    let gamma: f64 = cfg.get_or("gamma", 0.99)?;
    match kind {
        EnvKind::TigerTreasure => {
            let spec = TigerTreasureSpec {
                listen_success: cfg.get_or("listen_success", 0.85)?,
                gamma,
                horizon: cfg.get_or("horizon", 50)?,
            };
            build_tiger_treasure(&spec)
        }
        EnvKind::LatentChain => {
            let spec = LatentChainSpec {
                p0: cfg.get_or("p0", 0.9)?,
                gamma,
                horizon: cfg.get_or("horizon", 100)?,
            };
            build_latent_chain(&spec)
        }
        EnvKind::TigerMaze => {
            let d = TigerMazeSpec::default();
            let doors: Vec<usize> = if cfg.contains("maze.doors") { cfg.get_list("maze.doors")? } else { vec![] };
            let respawn: Vec<usize> = if cfg.contains("maze.respawn") { cfg.get_list("maze.respawn")? } else { vec![] };
            let spec = TigerMazeSpec {
                width: cfg.get_or("maze.width", d.width)?,
                height: cfg.get_or("maze.height", d.height)?,
                doors: if doors.len() == 2 { [doors[0], doors[1]] } else { d.doors },
                respawn: if respawn.len() == 2 { (respawn[0], respawn[1]) } else { d.respawn },
                keep_indicator: cfg.get_or("maze.keep_indicator", d.keep_indicator)?,
                gamma,
                horizon: cfg.get_or("horizon", d.horizon)?,
            };
            build_tiger_maze(&spec)
        }
        EnvKind::Custom => build_custom(cfg, gamma),
    }
}

/// A CMDP read from the transition CSV named by `custom.transitions`. Sizes
/// are inferred from the largest indices. Optional keys: `custom.prior`,
/// `custom.initial`, `custom.terminals`, `custom.omega` (true reward weights
/// over one-hot state features) and `horizon`.
fn build_custom<F: Scalar>(cfg: &Config, gamma: f64) -> Result<Environment<F>, EnvError> {
    let path: String = cfg.get("custom.transitions")?;
    let rows: Vec<TransitionRow> = read_csv(&path, TRANSITION_HEADER)?;
    if rows.is_empty() {
        return Err(EnvError::InvalidSpec(format!("{path}: no transitions")));
    }
    let ns = rows.iter().map(|r| r.s.max(r.s_next)).max().unwrap_or(0) + 1;
    let na = rows.iter().map(|r| r.a).max().unwrap_or(0) + 1;
    let nk = rows.iter().map(|r| r.theta).max().unwrap_or(0) + 1;
    let mut b = CmdpBuilder::<F>::new(ns, na, nk);
    for r in &rows {
        b.set(r.s, r.a, r.theta, r.s_next, F::lit(r.prob));
    }
    if cfg.contains("custom.prior") {
        b.context_prior(cfg.get_list::<f64>("custom.prior")?.into_iter().map(F::lit).collect());
    }
    let initial: usize = cfg.get_or("custom.initial", 0)?;
    if initial >= ns {
        return Err(EnvError::InvalidSpec(format!("custom.initial {initial} out of range")));
    }
    b.initial_state(initial).gamma(F::lit(gamma)).one_hot_state_features();
    if cfg.contains("custom.terminals") {
        for s in cfg.get_list::<usize>("custom.terminals")? {
            if s >= ns {
                return Err(EnvError::InvalidSpec(format!("terminal {s} out of range")));
            }
            b.terminal(s);
        }
    }
    let true_omega: Vec<F> = if cfg.contains("custom.omega") {
        cfg.get_list::<f64>("custom.omega")?.into_iter().map(F::lit).collect()
    } else {
        vec![F::zero(); ns]
    };
    if true_omega.len() != ns {
        return Err(EnvError::InvalidSpec(format!("custom.omega needs {ns} entries, got {}", true_omega.len())));
    }
    Ok(Environment {
        kind: EnvKind::Custom,
        mdp: b.build()?,
        true_omega,
        state_names: (0..ns).map(|i| format!("s{i}")).collect(),
        action_names: (0..na).map(|i| format!("a{i}")).collect(),
        coe_set: Vec::new(),
        horizon: cfg.get_or("horizon", 50)?,
        listen_action: None,
        gold_states: Vec::new(),
        tiger_states: Vec::new(),
        maze: None,
    })
}

/// Optimal deterministic policy of the `theta` slice under the true reward,
/// lowest action index on ties.
pub fn expert_policy<F: Scalar>(env: &Environment<F>, theta: usize) -> Result<TabularPolicy, EnvError> {
    let reward = env.true_reward();
    let res = value_iteration(&env.mdp, theta, &reward, F::lit(1e-12), 200_000)?;
    Ok(res.policy)
}

/// Expert demonstrations. `hidden_contexts` is kept for evaluation only.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertDataset {
    pub trajectories: Vec<Trajectory>,
    pub hidden_contexts: Vec<usize>,
}

impl ExpertDataset {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }
}

/// Samples `theta_i ~ p(theta)` and rolls out the expert for `theta_i`.
pub fn generate_expert_dataset<F: Scalar>(
    env: &Environment<F>,
    n_trajectories: usize,
    horizon: usize,
    rng: &mut RngStream,
) -> Result<ExpertDataset, EnvError> {
    if n_trajectories == 0 {
        return Err(EnvError::InvalidSpec("expert dataset needs at least one trajectory".into()));
    }
    let policies = (0..env.mdp.num_contexts())
        .map(|theta| expert_policy(env, theta))
        .collect::<Result<Vec<_>, _>>()?;
    let mut trajectories = Vec::with_capacity(n_trajectories);
    let mut hidden_contexts = Vec::with_capacity(n_trajectories);
    for _ in 0..n_trajectories {
        let theta = env.mdp.sample_context(rng);
        let mut pol = policies[theta].clone();
        trajectories.push(sample_rollout(&env.mdp, theta, &mut pol, horizon, rng)?);
        hidden_contexts.push(theta);
    }
    Ok(ExpertDataset { trajectories, hidden_contexts })
}

/// One-hot state feature rows, shared across actions.
pub(crate) fn one_hot_rows<F: Scalar>(ns: usize, na: usize) -> Vec<Vec<F>> {
    (0..ns * na)
        .map(|i| {
            let mut v = vec![F::zero(); ns];
            v[i / na] = F::one();
            v
        })
        .collect()
}

pub(crate) fn check_gamma(gamma: f64) -> Result<(), EnvError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(EnvError::InvalidSpec(format!("gamma must be in (0, 1), got {gamma}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_round_trip() {
        for kind in [EnvKind::TigerTreasure, EnvKind::LatentChain, EnvKind::TigerMaze] {
            assert_eq!(kind.name().parse::<EnvKind>().unwrap(), kind);
            let env: Environment<f64> = build_from_config(kind, &Config::default()).unwrap();
            env.mdp.validate().unwrap();
        }
        assert!("pong".parse::<EnvKind>().is_err());
    }

    #[test]
    fn expert_dataset_is_deterministic_per_seed() {
        let env: Environment<f64> = build_tiger_treasure(&TigerTreasureSpec::default()).unwrap();
        let a = generate_expert_dataset(&env, 50, 50, &mut RngStream::new(4)).unwrap();
        let b = generate_expert_dataset(&env, 50, 50, &mut RngStream::new(4)).unwrap();
        assert_eq!(a, b);
        assert!(generate_expert_dataset(&env, 0, 50, &mut RngStream::new(4)).is_err());
    }

    #[test]
    fn custom_mdp_loads_from_transition_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        // two-context coin: action 0 reaches state 1 in context 0 and state 2 in context 1
        let rows = [(0, 0, 0, 1, 1.0), (0, 0, 1, 2, 1.0), (1, 0, 0, 1, 1.0), (1, 0, 1, 1, 1.0), (2, 0, 0, 2, 1.0), (2, 0, 1, 2, 1.0)]
            .map(|(s, a, theta, s_next, prob)| TransitionRow { s, a, theta, s_next, prob });
        crate::io::write_csv(&path, TRANSITION_HEADER, rows).unwrap();
        let mut cfg = Config::default();
        cfg.set("custom.transitions", path.display());
        cfg.set("custom.prior", "0.25, 0.75");
        cfg.set("custom.terminals", "1, 2");
        cfg.set("custom.omega", "0, 1, -1");
        let env: Environment<f64> = build_from_config(EnvKind::Custom, &cfg).unwrap();
        assert_eq!((env.mdp.num_states(), env.mdp.num_actions(), env.mdp.num_contexts()), (3, 1, 2));
        assert_eq!(env.mdp.context_prior(), &[0.25, 0.75]);
        assert!(env.mdp.is_terminal(2));
        assert_eq!(env.true_reward().get(2, 0), -1.0);
        cfg.set("custom.omega", "1");
        assert!(matches!(build_from_config::<f64>(EnvKind::Custom, &cfg), Err(EnvError::InvalidSpec(_))));
    }
}
