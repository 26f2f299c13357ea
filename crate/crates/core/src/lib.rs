pub mod cmdp;
pub mod config;
pub mod io;
pub mod linalg;
pub mod planning;
pub mod rng;
pub mod scalar;
pub mod envs;
pub mod sf;
pub mod bamdp;
pub mod stats;
pub mod birl;
pub mod reward;
pub mod harness;

/// Double-precision aliases for the generic core types.
pub type Mdp = cmdp::ContextualMdp<f64>;
pub type Reward = cmdp::RewardTable<f64>;
pub type Env = envs::Environment<f64>;
pub type SfTable = sf::SuccessorTable<f64>;
pub type Belief = bamdp::BeliefState<f64>;
pub type BayesQTable = bamdp::QTable<f64>;
pub type Laplace = birl::LaplaceResult<f64>;
