//! Belief tracking, the belief-augmented MDP and Bayes-adaptive policy learning.

mod belief;
mod eval;
mod qtable;

use thiserror::Error;

pub use belief::{bayesian_transition, belief_update, trajectory_posterior, BeliefState};
pub use eval::{
    belief_mdp_optimal_value, belief_policy_value, evaluate_policy, reachable_beliefs, BeliefPolicy, EvalMetrics,
    FnBeliefPolicy,
};
pub use qtable::{
    qtable_from_rows, train_bayes_policy, AugmentedStates, BeliefKey, BeliefKeyer, EpsilonSchedule, QConfig, QTable,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BamdpError {
    #[error("transition ({s}, {a}) -> {s_next} has zero probability under every live context")]
    ImpossibleTransition { s: usize, a: usize, s_next: usize },
    #[error("Q-value became non-finite")]
    NonFiniteQ,
    #[error("reward table shape does not match the MDP")]
    RewardShape,
    #[error("beliefs {first:?} and {second:?} share a key")]
    KeyCollision { first: Vec<f64>, second: Vec<f64> },
    #[error("bad Q-table row: {0}")]
    BadQRow(String),
}
