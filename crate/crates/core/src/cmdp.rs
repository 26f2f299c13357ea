//! Contextual MDP data model, trajectories, rollouts and linear rewards.
//!
//! A [`ContextualMdp`] is a family of MDPs sharing states, actions, reward
//! features and discount, whose transition kernel depends on a hidden context
//! index `theta`. All tables are dense and row-major.

use thiserror::Error;

use crate::rng::RngStream;
use crate::scalar::{dot, Scalar};

/// Tolerance for stochastic rows and probability vectors.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CmdpError {
    #[error("transition row (s={0}, a={1}, theta={2}) is not a probability distribution")]
    NonStochasticRow(usize, usize, usize),
    #[error("bad prior: {0}")]
    BadPrior(String),
    #[error("discount must lie in (0, 1), got {0}")]
    BadGamma(f64),
    #[error("feature vector for (s={0}, a={1}) has length {2}, expected {3}")]
    RaggedFeatures(usize, usize, usize, usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Discrete contextual MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextualMdp<F> {
    num_states: usize,
    num_actions: usize,
    num_contexts: usize,
    /// Indexed `((s * A + a) * K + theta) * S + s_next`.
    transition: Vec<F>,
    context_prior: Vec<F>,
    initial_dist: Vec<F>,
    gamma: F,
    /// Indexed `(s * A + a) * d + k`.
    features: Vec<F>,
    feature_dim: usize,
    terminal: Vec<bool>,
}

impl<F: Scalar> ContextualMdp<F> {
    pub fn num_states(&self) -> usize {
        self.num_states
    }
    pub fn num_actions(&self) -> usize {
        self.num_actions
    }
    pub fn num_contexts(&self) -> usize {
        self.num_contexts
    }
    pub fn gamma(&self) -> F {
        self.gamma
    }
    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }
    pub fn context_prior(&self) -> &[F] {
        &self.context_prior
    }
    pub fn initial_dist(&self) -> &[F] {
        &self.initial_dist
    }
    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }
    pub fn terminal_mask(&self) -> &[bool] {
        &self.terminal
    }

    #[inline]
    fn row_offset(&self, s: usize, a: usize, theta: usize) -> usize {
        ((s * self.num_actions + a) * self.num_contexts + theta) * self.num_states
    }

    /// Next-state distribution `p(. | s, a, theta)`.
    #[inline]
    pub fn transition_row(&self, s: usize, a: usize, theta: usize) -> &[F] {
        let o = self.row_offset(s, a, theta);
        &self.transition[o..o + self.num_states]
    }

    pub fn transition_row_mut(&mut self, s: usize, a: usize, theta: usize) -> &mut [F] {
        let o = self.row_offset(s, a, theta);
        let n = self.num_states;
        &mut self.transition[o..o + n]
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize, theta: usize, s_next: usize) -> F {
        self.transition[self.row_offset(s, a, theta) + s_next]
    }

    /// Reward feature vector `nu(s, a)`.
    #[inline]
    pub fn features(&self, s: usize, a: usize) -> &[F] {
        let o = (s * self.num_actions + a) * self.feature_dim;
        &self.features[o..o + self.feature_dim]
    }

    pub fn set_gamma(&mut self, gamma: F) {
        self.gamma = gamma;
    }

    pub fn set_context_prior(&mut self, prior: Vec<F>) {
        self.context_prior = prior;
    }

    /// Returns the first violated invariant, if any.
    pub fn validate(&self) -> Result<(), CmdpError> {
        let tol = F::lit(STOCHASTIC_TOL);
        let (ns, na, nk) = (self.num_states, self.num_actions, self.num_contexts);
        if ns == 0 || na == 0 || nk == 0 {
            return Err(CmdpError::InvalidArgument("empty state, action or context set".into()));
        }
        if self.transition.len() != ns * na * nk * ns {
            return Err(CmdpError::InvalidArgument("transition table has wrong size".into()));
        }
        for s in 0..ns {
            for a in 0..na {
                for theta in 0..nk {
                    let row = self.transition_row(s, a, theta);
                    let sum: F = row.iter().copied().sum();
                    let bad_entry = row.iter().any(|p| !(*p >= F::zero()) || !p.is_finite());
                    if bad_entry || (sum - F::one()).abs() > tol {
                        return Err(CmdpError::NonStochasticRow(s, a, theta));
                    }
                }
            }
        }
        check_distribution(&self.context_prior, nk, "context_prior")?;
        check_distribution(&self.initial_dist, ns, "initial_dist")?;
        if !(self.gamma > F::zero() && self.gamma < F::one()) {
            return Err(CmdpError::BadGamma(self.gamma.as_f64()));
        }
        if self.features.len() != ns * na * self.feature_dim {
            return Err(CmdpError::RaggedFeatures(0, 0, self.features.len(), ns * na * self.feature_dim));
        }
        if self.terminal.len() != ns {
            return Err(CmdpError::InvalidArgument("terminal mask has wrong length".into()));
        }
        Ok(())
    }

    /// Samples `s' ~ p(. | s, a, theta)`.
    pub fn sample_next(&self, s: usize, a: usize, theta: usize, rng: &mut RngStream) -> usize {
        rng.categorical(self.transition_row(s, a, theta))
    }

    pub fn sample_initial(&self, rng: &mut RngStream) -> usize {
        rng.categorical(&self.initial_dist)
    }

    pub fn sample_context(&self, rng: &mut RngStream) -> usize {
        rng.categorical(&self.context_prior)
    }

    /// Most probable context under the prior (lowest index on ties).
    pub fn prior_mode(&self) -> usize {
        crate::scalar::argmax_lowest(&self.context_prior)
    }

    /// Copy of the MDP with a different reward-feature table.
    pub fn with_features(&self, feature_dim: usize, features: Vec<Vec<F>>) -> Result<Self, CmdpError> {
        let flat = flatten_features(self.num_states, self.num_actions, feature_dim, features)?;
        let mut out = self.clone();
        out.feature_dim = feature_dim;
        out.features = flat;
        Ok(out)
    }
}

fn check_distribution<F: Scalar>(p: &[F], len: usize, name: &str) -> Result<(), CmdpError> {
    if p.len() != len {
        return Err(CmdpError::BadPrior(format!("{name} has length {}, expected {len}", p.len())));
    }
    let sum: F = p.iter().copied().sum();
    if p.iter().any(|x| !(*x >= F::zero())) || (sum - F::one()).abs() > F::lit(STOCHASTIC_TOL) {
        return Err(CmdpError::BadPrior(format!("{name} does not sum to 1 (sum = {sum})")));
    }
    Ok(())
}

fn flatten_features<F: Scalar>(
    ns: usize,
    na: usize,
    d: usize,
    rows: Vec<Vec<F>>,
) -> Result<Vec<F>, CmdpError> {
    if rows.len() != ns * na {
        return Err(CmdpError::DimensionMismatch { expected: ns * na, got: rows.len() });
    }
    let mut flat = Vec::with_capacity(ns * na * d);
    for (i, row) in rows.into_iter().enumerate() {
        if row.len() != d {
            return Err(CmdpError::RaggedFeatures(i / na, i % na, row.len(), d));
        }
        flat.extend(row);
    }
    Ok(flat)
}

/// Incremental constructor for [`ContextualMdp`].
#[derive(Debug, Clone)]
pub struct CmdpBuilder<F> {
    num_states: usize,
    num_actions: usize,
    num_contexts: usize,
    transition: Vec<F>,
    context_prior: Vec<F>,
    initial_dist: Vec<F>,
    gamma: F,
    features: Option<(usize, Vec<Vec<F>>)>,
    terminal: Vec<bool>,
}

impl<F: Scalar> CmdpBuilder<F> {
    pub fn new(num_states: usize, num_actions: usize, num_contexts: usize) -> Self {
        let uniform_ctx = F::one() / F::from_usize_lossy(num_contexts.max(1));
        let mut initial = vec![F::zero(); num_states];
        if num_states > 0 {
            initial[0] = F::one();
        }
        Self {
            num_states,
            num_actions,
            num_contexts,
            transition: vec![F::zero(); num_states * num_actions * num_contexts * num_states],
            context_prior: vec![uniform_ctx; num_contexts],
            initial_dist: initial,
            gamma: F::lit(0.99),
            features: None,
            terminal: vec![false; num_states],
        }
    }

    /// Sets `p(s_next | s, a, theta) = prob`.
    pub fn set(&mut self, s: usize, a: usize, theta: usize, s_next: usize, prob: F) -> &mut Self {
        let o = ((s * self.num_actions + a) * self.num_contexts + theta) * self.num_states;
        self.transition[o + s_next] = prob;
        self
    }

    /// Deterministic transition for every context.
    pub fn set_all_contexts(&mut self, s: usize, a: usize, s_next: usize) -> &mut Self {
        for theta in 0..self.num_contexts {
            self.set(s, a, theta, s_next, F::one());
        }
        self
    }

    pub fn context_prior(&mut self, prior: Vec<F>) -> &mut Self {
        self.context_prior = prior;
        self
    }

    pub fn initial_dist(&mut self, dist: Vec<F>) -> &mut Self {
        self.initial_dist = dist;
        self
    }

    pub fn initial_state(&mut self, s: usize) -> &mut Self {
        self.initial_dist = vec![F::zero(); self.num_states];
        self.initial_dist[s] = F::one();
        self
    }

    pub fn gamma(&mut self, gamma: F) -> &mut Self {
        self.gamma = gamma;
        self
    }

    pub fn terminal(&mut self, s: usize) -> &mut Self {
        self.terminal[s] = true;
        self
    }

    /// Feature rows indexed by `s * A + a`.
    pub fn features(&mut self, dim: usize, rows: Vec<Vec<F>>) -> &mut Self {
        self.features = Some((dim, rows));
        self
    }

    /// One-hot state indicators (`d = num_states`), shared across actions.
    pub fn one_hot_state_features(&mut self) -> &mut Self {
        let (ns, na) = (self.num_states, self.num_actions);
        let rows = (0..ns * na)
            .map(|i| {
                let mut v = vec![F::zero(); ns];
                v[i / na] = F::one();
                v
            })
            .collect();
        self.features = Some((ns, rows));
        self
    }

    pub fn build(&self) -> Result<ContextualMdp<F>, CmdpError> {
        let (dim, rows) = match &self.features {
            Some((d, rows)) => (*d, rows.clone()),
            None => {
                let mut b = self.clone();
                b.one_hot_state_features();
                b.features.unwrap()
            }
        };
        let features = flatten_features(self.num_states, self.num_actions, dim, rows)?;
        let mdp = ContextualMdp {
            num_states: self.num_states,
            num_actions: self.num_actions,
            num_contexts: self.num_contexts,
            transition: self.transition.clone(),
            context_prior: self.context_prior.clone(),
            initial_dist: self.initial_dist.clone(),
            gamma: self.gamma,
            features,
            feature_dim: dim,
            terminal: self.terminal.clone(),
        };
        mdp.validate()?;
        Ok(mdp)
    }
}

/// State-action trajectory. `final_state` is the state reached after the last
/// recorded action (a terminal state, or the state where truncation happened).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Trajectory {
    steps: Vec<(usize, usize)>,
    final_state: usize,
}

impl Trajectory {
    pub fn new(steps: Vec<(usize, usize)>, final_state: usize) -> Result<Self, CmdpError> {
        if steps.is_empty() {
            return Err(CmdpError::InvalidArgument("trajectory must have at least one step".into()));
        }
        Ok(Self { steps, final_state })
    }

    /// Checks every index against the MDP's state and action counts.
    pub fn check_indices<F: Scalar>(&self, mdp: &ContextualMdp<F>) -> Result<(), CmdpError> {
        let ns = mdp.num_states();
        let na = mdp.num_actions();
        for (t, &(s, a)) in self.steps.iter().enumerate() {
            if s >= ns || a >= na {
                return Err(CmdpError::IndexOutOfRange(format!("step {t}: (s={s}, a={a})")));
            }
        }
        if self.final_state >= ns {
            return Err(CmdpError::IndexOutOfRange(format!("final state {}", self.final_state)));
        }
        Ok(())
    }

    pub fn steps(&self) -> &[(usize, usize)] {
        &self.steps
    }

    pub fn final_state(&self) -> usize {
        self.final_state
    }

    /// Number of recorded state-action pairs, `H_i`.
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    /// Iterates `(s_t, a_t, s_{t+1})`.
    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.steps.iter().enumerate().map(move |(t, &(s, a))| {
            let next = self.steps.get(t + 1).map_or(self.final_state, |&(s2, _)| s2);
            (s, a, next)
        })
    }

    /// Next action recorded after step `t`, if any.
    pub fn next_action(&self, t: usize) -> Option<usize> {
        self.steps.get(t + 1).map(|&(_, a)| a)
    }

    pub fn visits(&self, state: usize) -> bool {
        self.steps.iter().any(|&(s, _)| s == state) || self.final_state == state
    }
}

/// Action selection over histories. History-dependent policies keep their own
/// summary, updated through [`Policy::observe`].
pub trait Policy<F: Scalar> {
    fn reset(&mut self, _mdp: &ContextualMdp<F>) {}
    fn act(&mut self, mdp: &ContextualMdp<F>, state: usize, rng: &mut RngStream) -> usize;
    fn observe(&mut self, _mdp: &ContextualMdp<F>, _s: usize, _a: usize, _s_next: usize) {}
}

/// Deterministic Markov policy: one action per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TabularPolicy {
    pub actions: Vec<usize>,
}

impl<F: Scalar> Policy<F> for TabularPolicy {
    fn act(&mut self, _mdp: &ContextualMdp<F>, state: usize, _rng: &mut RngStream) -> usize {
        self.actions[state]
    }
}

/// Stochastic Markov policy: a distribution over actions per state.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPolicy<F> {
    pub probs: Vec<Vec<F>>,
}

impl<F: Scalar> StochasticPolicy<F> {
    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let p = F::one() / F::from_usize_lossy(num_actions);
        Self { probs: vec![vec![p; num_actions]; num_states] }
    }

    pub fn from_deterministic(policy: &TabularPolicy, num_actions: usize) -> Self {
        let probs = policy
            .actions
            .iter()
            .map(|&a| {
                let mut row = vec![F::zero(); num_actions];
                row[a] = F::one();
                row
            })
            .collect();
        Self { probs }
    }
}

impl<F: Scalar> Policy<F> for StochasticPolicy<F> {
    fn act(&mut self, _mdp: &ContextualMdp<F>, state: usize, rng: &mut RngStream) -> usize {
        rng.categorical(&self.probs[state])
    }
}

/// Closure-backed Markov policy.
pub struct FnPolicy<G>(pub G);

impl<F: Scalar, G: FnMut(usize, &mut RngStream) -> usize> Policy<F> for FnPolicy<G> {
    fn act(&mut self, _mdp: &ContextualMdp<F>, state: usize, rng: &mut RngStream) -> usize {
        (self.0)(state, rng)
    }
}

/// Rolls out `policy` in context `theta` from `p(s0)` for at most `max_steps`
/// actions, stopping early when a terminal state is reached.
pub fn sample_rollout<F: Scalar, P: Policy<F> + ?Sized>(
    mdp: &ContextualMdp<F>,
    theta: usize,
    policy: &mut P,
    max_steps: usize,
    rng: &mut RngStream,
) -> Result<Trajectory, CmdpError> {
    if theta >= mdp.num_contexts() {
        return Err(CmdpError::IndexOutOfRange(format!("theta {theta}")));
    }
    if max_steps == 0 {
        return Err(CmdpError::InvalidArgument("max_steps must be at least 1".into()));
    }
    let mut s = mdp.sample_initial(rng);
    if mdp.is_terminal(s) {
        return Err(CmdpError::InvalidArgument(format!("initial state {s} is terminal")));
    }
    policy.reset(mdp);
    let mut steps = Vec::with_capacity(max_steps.min(256));
    for _ in 0..max_steps {
        let a = policy.act(mdp, s, rng);
        let s_next = mdp.sample_next(s, a, theta, rng);
        policy.observe(mdp, s, a, s_next);
        steps.push((s, a));
        s = s_next;
        if mdp.is_terminal(s) {
            break;
        }
    }
    Ok(Trajectory { steps, final_state: s })
}

/// Linear reward `nu(s, a)^T omega`.
pub fn feature_reward<F: Scalar>(
    mdp: &ContextualMdp<F>,
    omega: &[F],
    s: usize,
    a: usize,
) -> Result<F, CmdpError> {
    if omega.len() != mdp.feature_dim() {
        return Err(CmdpError::DimensionMismatch { expected: mdp.feature_dim(), got: omega.len() });
    }
    if s >= mdp.num_states() || a >= mdp.num_actions() {
        return Err(CmdpError::IndexOutOfRange(format!("(s={s}, a={a})")));
    }
    Ok(dot(mdp.features(s, a), omega))
}

/// Dense reward table over `(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTable<F> {
    num_states: usize,
    num_actions: usize,
    values: Vec<F>,
}

impl<F: Scalar> RewardTable<F> {
    pub fn new(num_states: usize, num_actions: usize, values: Vec<F>) -> Result<Self, CmdpError> {
        if values.len() != num_states * num_actions {
            return Err(CmdpError::DimensionMismatch {
                expected: num_states * num_actions,
                got: values.len(),
            });
        }
        Ok(Self { num_states, num_actions, values })
    }

    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self { num_states, num_actions, values: vec![F::zero(); num_states * num_actions] }
    }

    /// `nu(s, a)^T omega` for every cell.
    pub fn from_weights(mdp: &ContextualMdp<F>, omega: &[F]) -> Result<Self, CmdpError> {
        let mut values = Vec::with_capacity(mdp.num_states() * mdp.num_actions());
        for s in 0..mdp.num_states() {
            for a in 0..mdp.num_actions() {
                values.push(feature_reward(mdp, omega, s, a)?);
            }
        }
        Ok(Self { num_states: mdp.num_states(), num_actions: mdp.num_actions(), values })
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> F {
        self.values[s * self.num_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: F) {
        self.values[s * self.num_actions + a] = v;
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [F] {
        &mut self.values
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        Self {
            num_states: self.num_states,
            num_actions: self.num_actions,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> ContextualMdp<f64> {
        // 0 -> 1 -> 2 (terminal), single action, single context.
        let mut b = CmdpBuilder::new(3, 1, 1);
        b.set_all_contexts(0, 0, 1).set_all_contexts(1, 0, 2).set_all_contexts(2, 0, 2);
        b.terminal(2).gamma(0.9);
        b.build().unwrap()
    }

    #[test]
    fn deterministic_chain_rollout() {
        let mdp = chain();
        let mut pol = TabularPolicy { actions: vec![0, 0, 0] };
        let mut rng = RngStream::new(1);
        let traj = sample_rollout(&mdp, 0, &mut pol, 10, &mut rng).unwrap();
        assert_eq!(traj.steps(), &[(0, 0), (1, 0)]);
        assert_eq!(traj.final_state(), 2);
        let tr: Vec<_> = traj.transitions().collect();
        assert_eq!(tr, vec![(0, 0, 1), (1, 0, 2)]);
    }

    #[test]
    fn truncation_keeps_last_state() {
        let mdp = chain();
        let mut pol = TabularPolicy { actions: vec![0, 0, 0] };
        let traj = sample_rollout(&mdp, 0, &mut pol, 1, &mut RngStream::new(0)).unwrap();
        assert_eq!(traj.horizon(), 1);
        assert_eq!(traj.final_state(), 1);
    }

    #[test]
    fn validate_flags_scaled_row() {
        let mut mdp = chain();
        for p in mdp.transition_row_mut(0, 0, 0) {
            *p *= 2.0;
        }
        assert_eq!(mdp.validate(), Err(CmdpError::NonStochasticRow(0, 0, 0)));
    }

    #[test]
    fn validate_flags_gamma_one() {
        let mut mdp = chain();
        mdp.set_gamma(1.0);
        assert_eq!(mdp.validate(), Err(CmdpError::BadGamma(1.0)));
    }

    #[test]
    fn builder_rejects_ragged_features() {
        let mut b = CmdpBuilder::<f64>::new(2, 1, 1);
        b.set_all_contexts(0, 0, 1).set_all_contexts(1, 0, 1);
        b.features(2, vec![vec![1.0, 0.0], vec![1.0]]);
        assert_eq!(b.build().unwrap_err(), CmdpError::RaggedFeatures(1, 0, 1, 2));
    }

    #[test]
    fn bad_prior_is_reported() {
        let mut b = CmdpBuilder::<f64>::new(1, 1, 2);
        b.set_all_contexts(0, 0, 0).context_prior(vec![0.7, 0.7]);
        assert!(matches!(b.build(), Err(CmdpError::BadPrior(_))));
    }

    #[test]
    fn feature_reward_checks_dimension() {
        let mdp = chain();
        assert_eq!(feature_reward(&mdp, &[0.0, 1.0, -1.0], 1, 0).unwrap(), 1.0);
        assert_eq!(feature_reward(&mdp, &[0.0; 3], 2, 0).unwrap(), 0.0);
        assert!(matches!(
            feature_reward(&mdp, &[0.0; 2], 0, 0),
            Err(CmdpError::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn trajectory_rejects_empty_and_bad_indices() {
        assert!(Trajectory::new(vec![], 0).is_err());
        let t = Trajectory::new(vec![(0, 0), (5, 0)], 1).unwrap();
        assert!(t.check_indices(&chain()).is_err());
    }
}
