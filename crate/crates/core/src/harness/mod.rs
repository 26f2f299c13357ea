//! End-to-end orchestration: expert data, reward fit, reward refinement,
//! Bayes-adaptive policy learning and evaluation, plus the figure sweeps.

mod figures;
mod pipeline;
mod settings;

use thiserror::Error;

pub use figures::{run_fig2, run_fig3, run_fig4, Fig2Row, Fig3Row, Fig4Outcome, Fig4SweepRow, ReturnCurveRow};
pub use pipeline::{
    read_expert, run_all, run_pipeline, stage_expert, stage_fit, stage_policy, stage_reward, write_expert,
    write_fit, CurvePoint, PolicyOutcome, RunRecord,
};
pub use settings::{default_config, ExperimentConfig};

use crate::bamdp::BamdpError;
use crate::birl::BirlError;
use crate::config::ConfigError;
use crate::envs::EnvError;
use crate::io::IoError;
use crate::reward::RewardError;

/// Pipeline failure labelled with the stage it came from.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("environment: {0}")]
    Env(#[from] EnvError),
    #[error("expert data: {0}")]
    Expert(EnvError),
    #[error("reward fit: {0}")]
    Fit(#[from] BirlError),
    #[error("reward refinement: {0}")]
    Reward(#[from] RewardError),
    #[error("policy learning: {0}")]
    Policy(#[from] BamdpError),
    #[error("output: {0}")]
    Io(#[from] IoError),
}

impl HarnessError {
    /// Bad or inconsistent settings, as opposed to a failure while running.
    pub fn is_config(&self) -> bool {
        match self {
            HarnessError::Config(_) => true,
            HarnessError::Env(e) => matches!(e, EnvError::InvalidSpec(_) | EnvError::UnknownEnv(_) | EnvError::Config(_)),
            HarnessError::Reward(e) => matches!(e, RewardError::InvalidSpec(_) | RewardError::CoeCellOutOfRange { .. }),
            HarnessError::Fit(e) => matches!(e, BirlError::InvalidParams(_) | BirlError::DimensionMismatch { .. }),
            _ => false,
        }
    }

    /// Numerical blow-up during fitting or policy learning.
    pub fn is_divergence(&self) -> bool {
        match self {
            HarnessError::Fit(e) => matches!(e, BirlError::Diverged { .. } | BirlError::NonFiniteLogit { .. }),
            HarnessError::Policy(e) => matches!(e, BamdpError::NonFiniteQ),
            _ => false,
        }
    }

    /// Process exit status: 1 for settings errors, 2 for divergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.is_divergence() {
            2
        } else {
            1
        }
    }
}
