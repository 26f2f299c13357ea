//! Exact context posteriors in log space.

use super::BamdpError;
use crate::cmdp::{ContextualMdp, Trajectory};
use crate::rng::RngStream;
use crate::scalar::{log_sum_exp, Scalar};

/// Posterior over contexts. `log_weights` are kept normalized, so
/// `exp(log_weights)` sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState<F> {
    log_weights: Vec<F>,
}

impl<F: Scalar> BeliefState<F> {
    pub fn from_prior(mdp: &ContextualMdp<F>) -> Self {
        Self::from_probs(mdp.context_prior())
    }

    pub fn from_probs(probs: &[F]) -> Self {
        let mut b = Self { log_weights: probs.iter().map(|p| p.ln()).collect() };
        b.normalize();
        b
    }

    /// Point mass on `theta`.
    pub fn delta(num_contexts: usize, theta: usize) -> Self {
        let mut lw = vec![F::neg_infinity(); num_contexts];
        lw[theta] = F::zero();
        Self { log_weights: lw }
    }

    fn normalize(&mut self) {
        let z = log_sum_exp(&self.log_weights);
        for w in &mut self.log_weights {
            *w -= z;
        }
    }

    pub fn log_weights(&self) -> &[F] {
        &self.log_weights
    }

    pub fn num_contexts(&self) -> usize {
        self.log_weights.len()
    }

    pub fn prob(&self, theta: usize) -> F {
        self.log_weights[theta].exp()
    }

    pub fn probs(&self) -> Vec<F> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    /// The context carrying all the mass, if any.
    pub fn certain_context(&self) -> Option<usize> {
        let mut live = self.log_weights.iter().enumerate().filter(|(_, w)| **w > F::neg_infinity());
        match (live.next(), live.next()) {
            (Some((i, _)), None) => Some(i),
            _ => None,
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> usize {
        rng.categorical(&self.probs())
    }

    /// Bayes update on the observed transition `(s, a, s')`.
    pub fn update(&mut self, mdp: &ContextualMdp<F>, s: usize, a: usize, s_next: usize) -> Result<(), BamdpError> {
        let mut any = false;
        for (theta, w) in self.log_weights.iter_mut().enumerate() {
            let p = mdp.prob(s, a, theta, s_next);
            if p > F::zero() && *w > F::neg_infinity() {
                any = true;
            }
            *w += p.ln();
        }
        if !any {
            return Err(BamdpError::ImpossibleTransition { s, a, s_next });
        }
        self.normalize();
        Ok(())
    }
}

/// Returns the posterior after observing `(s, a, s')`.
pub fn belief_update<F: Scalar>(
    belief: &BeliefState<F>,
    s: usize,
    a: usize,
    s_next: usize,
    mdp: &ContextualMdp<F>,
) -> Result<BeliefState<F>, BamdpError> {
    let mut b = belief.clone();
    b.update(mdp, s, a, s_next)?;
    Ok(b)
}

/// `p(theta | tau)` from transitions only, starting at the context prior.
pub fn trajectory_posterior<F: Scalar>(traj: &Trajectory, mdp: &ContextualMdp<F>) -> Result<BeliefState<F>, BamdpError> {
    let mut b = BeliefState::from_prior(mdp);
    for (s, a, sn) in traj.transitions() {
        b.update(mdp, s, a, sn)?;
    }
    Ok(b)
}

/// Outcomes `(s', p(s' | b, s, a), updated belief)` of the mixture kernel,
/// restricted to next states with positive probability.
pub fn bayesian_transition<F: Scalar>(
    belief: &BeliefState<F>,
    s: usize,
    a: usize,
    mdp: &ContextualMdp<F>,
) -> Result<Vec<(usize, F, BeliefState<F>)>, BamdpError> {
    let probs = belief.probs();
    let mut out = Vec::new();
    for sn in 0..mdp.num_states() {
        let p: F = probs.iter().enumerate().map(|(theta, &w)| w * mdp.prob(s, a, theta, sn)).sum();
        if p > F::zero() {
            out.push((sn, p, belief_update(belief, s, a, sn, mdp)?));
        }
    }
    Ok(out)
}
