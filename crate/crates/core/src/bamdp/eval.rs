//! Monte-Carlo evaluation of belief-conditioned policies and exact
//! finite-horizon oracles over the reachable belief set.

use std::collections::HashMap;

use super::belief::{bayesian_transition, BeliefState};
use super::qtable::{BeliefKey, BeliefKeyer, QTable};
use super::BamdpError;
use crate::cmdp::{ContextualMdp, RewardTable};
use crate::envs::Environment;
use crate::io::MetricRow;
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::stats::mean_se;

/// Action selection from `(state, belief, step)`.
pub trait BeliefPolicy<F: Scalar> {
    fn act(&mut self, s: usize, belief: &BeliefState<F>, t: usize, rng: &mut RngStream) -> usize;
}

impl<F: Scalar> BeliefPolicy<F> for QTable<F> {
    fn act(&mut self, s: usize, belief: &BeliefState<F>, _t: usize, _rng: &mut RngStream) -> usize {
        self.greedy(s, belief)
    }
}

impl<F: Scalar> BeliefPolicy<F> for &QTable<F> {
    fn act(&mut self, s: usize, belief: &BeliefState<F>, _t: usize, _rng: &mut RngStream) -> usize {
        self.greedy(s, belief)
    }
}

/// Closure-backed belief policy.
pub struct FnBeliefPolicy<G>(pub G);

impl<F: Scalar, G: FnMut(usize, &BeliefState<F>, usize) -> usize> BeliefPolicy<F> for FnBeliefPolicy<G> {
    fn act(&mut self, s: usize, belief: &BeliefState<F>, t: usize, _rng: &mut RngStream) -> usize {
        (self.0)(s, belief, t)
    }
}

/// Per-episode means with standard errors (sample std / sqrt(n)).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalMetrics {
    pub episodes: usize,
    pub mean_return: f64,
    pub return_se: f64,
    /// Fraction of episodes whose first door outcome is gold.
    pub success_rate: f64,
    pub success_se: f64,
    /// Listen actions per episode.
    pub explore_steps: f64,
    pub explore_se: f64,
    /// Fraction of episodes that listened on every step.
    pub capped_fraction: f64,
    /// Gold rate among episodes that reached a door.
    pub first_door_correct: f64,
    pub first_door_se: f64,
}

impl EvalMetrics {
    pub fn horizon_capped(&self) -> bool {
        self.capped_fraction > 0.0
    }

    pub fn to_rows(&self) -> Vec<MetricRow> {
        let row = |m: &str, mean: f64, stderr: f64| MetricRow { metric: m.to_string(), mean, stderr };
        vec![
            row("episodes", self.episodes as f64, 0.0),
            row("return", self.mean_return, self.return_se),
            row("success_rate", self.success_rate, self.success_se),
            row("explore_steps", self.explore_steps, self.explore_se),
            row("capped_fraction", self.capped_fraction, 0.0),
            row("first_door_correct", self.first_door_correct, self.first_door_se),
        ]
    }
}

/// Runs `episodes` episodes of at most `horizon` steps with `theta ~ p(theta)`,
/// scoring `sum_t gamma^t r(s_t, a_t)` under `reward`. Episodes end on
/// entering a terminal state.
pub fn evaluate_policy<F: Scalar, P: BeliefPolicy<F>>(
    env: &Environment<F>,
    policy: &mut P,
    reward: &RewardTable<F>,
    episodes: usize,
    horizon: usize,
    rng: &mut RngStream,
) -> Result<EvalMetrics, BamdpError> {
    let mdp = &env.mdp;
    let gamma = mdp.gamma().as_f64();
    let mut returns = Vec::with_capacity(episodes);
    let mut success = Vec::with_capacity(episodes);
    let mut explore = Vec::with_capacity(episodes);
    let mut door_correct = Vec::new();
    let mut capped = 0usize;
    for _ in 0..episodes {
        let theta = mdp.sample_context(rng);
        let mut s = mdp.sample_initial(rng);
        let mut belief = BeliefState::from_prior(mdp);
        let mut ret = 0.0;
        let mut disc = 1.0;
        let mut listens = 0usize;
        let mut first_door: Option<bool> = None;
        for t in 0..horizon {
            let a = policy.act(s, &belief, t, rng);
            ret += disc * reward.get(s, a).as_f64();
            disc *= gamma;
            if Some(a) == env.listen_action {
                listens += 1;
            }
            let sn = mdp.sample_next(s, a, theta, rng);
            belief.update(mdp, s, a, sn)?;
            if first_door.is_none() {
                if env.gold_states.contains(&sn) {
                    first_door = Some(true);
                } else if env.tiger_states.contains(&sn) {
                    first_door = Some(false);
                }
            }
            s = sn;
            if mdp.is_terminal(s) {
                break;
            }
        }
        if horizon > 0 && listens == horizon {
            capped += 1;
        }
        returns.push(ret);
        explore.push(listens as f64);
        success.push(if first_door == Some(true) { 1.0 } else { 0.0 });
        if let Some(c) = first_door {
            door_correct.push(if c { 1.0 } else { 0.0 });
        }
    }
    let (mean_return, return_se) = mean_se(&returns);
    let (success_rate, success_se) = mean_se(&success);
    let (explore_steps, explore_se) = mean_se(&explore);
    let (first_door_correct, first_door_se) = mean_se(&door_correct);
    Ok(EvalMetrics {
        episodes,
        mean_return,
        return_se,
        success_rate,
        success_se,
        explore_steps,
        explore_se,
        capped_fraction: capped as f64 / episodes.max(1) as f64,
        first_door_correct,
        first_door_se,
    })
}

/// Optimal expected return of the finite-horizon belief MDP from `p(s0)` and the
/// prior belief. Entering a terminal state ends the episode.
pub fn belief_mdp_optimal_value<F: Scalar>(
    mdp: &ContextualMdp<F>,
    reward: &RewardTable<F>,
    horizon: usize,
) -> Result<f64, BamdpError> {
    let keyer = BeliefKeyer::lossless();
    let mut memo: HashMap<(usize, BeliefKey, usize), f64> = HashMap::new();
    let prior = BeliefState::from_prior(mdp);
    let mut total = 0.0;
    for (s, &p) in mdp.initial_dist().iter().enumerate() {
        if p > F::zero() {
            total += p.as_f64() * optimal_rec(mdp, reward, &keyer, s, &prior, horizon, &mut memo)?;
        }
    }
    Ok(total)
}

fn optimal_rec<F: Scalar>(
    mdp: &ContextualMdp<F>,
    reward: &RewardTable<F>,
    keyer: &BeliefKeyer,
    s: usize,
    b: &BeliefState<F>,
    steps_left: usize,
    memo: &mut HashMap<(usize, BeliefKey, usize), f64>,
) -> Result<f64, BamdpError> {
    if steps_left == 0 || mdp.is_terminal(s) {
        return Ok(0.0);
    }
    let key = (s, keyer.key(b), steps_left);
    if let Some(v) = memo.get(&key) {
        return Ok(*v);
    }
    let g = mdp.gamma().as_f64();
    let mut best = f64::NEG_INFINITY;
    for a in 0..mdp.num_actions() {
        let mut v = reward.get(s, a).as_f64();
        for (sn, p, bn) in bayesian_transition(b, s, a, mdp)? {
            v += g * p.as_f64() * optimal_rec(mdp, reward, keyer, sn, &bn, steps_left - 1, memo)?;
        }
        best = best.max(v);
    }
    memo.insert(key, best);
    Ok(best)
}

/// Exact expected return of a deterministic belief policy over `horizon`
/// steps, by enumerating the belief-MDP outcome tree with memoization.
pub fn belief_policy_value<F: Scalar>(
    mdp: &ContextualMdp<F>,
    reward: &RewardTable<F>,
    horizon: usize,
    policy: &dyn Fn(usize, &BeliefState<F>, usize) -> usize,
) -> Result<f64, BamdpError> {
    let keyer = BeliefKeyer::lossless();
    let mut memo = HashMap::new();
    let prior = BeliefState::from_prior(mdp);
    let mut total = 0.0;
    for (s, &p) in mdp.initial_dist().iter().enumerate() {
        if p > F::zero() {
            total += p.as_f64() * policy_rec(mdp, reward, &keyer, s, &prior, 0, horizon, policy, &mut memo)?;
        }
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn policy_rec<F: Scalar>(
    mdp: &ContextualMdp<F>,
    reward: &RewardTable<F>,
    keyer: &BeliefKeyer,
    s: usize,
    b: &BeliefState<F>,
    t: usize,
    horizon: usize,
    policy: &dyn Fn(usize, &BeliefState<F>, usize) -> usize,
    memo: &mut HashMap<(usize, BeliefKey, usize), f64>,
) -> Result<f64, BamdpError> {
    if t >= horizon || mdp.is_terminal(s) {
        return Ok(0.0);
    }
    let key = (s, keyer.key(b), t);
    if let Some(v) = memo.get(&key) {
        return Ok(*v);
    }
    let a = policy(s, b, t);
    let g = mdp.gamma().as_f64();
    let mut v = reward.get(s, a).as_f64();
    for (sn, p, bn) in bayesian_transition(b, s, a, mdp)? {
        v += g * p.as_f64() * policy_rec(mdp, reward, keyer, sn, &bn, t + 1, horizon, policy, memo)?;
    }
    memo.insert(key, v);
    Ok(v)
}

/// Every belief reachable from the prior within `depth` steps under any actions.
pub fn reachable_beliefs<F: Scalar>(mdp: &ContextualMdp<F>, depth: usize) -> Result<Vec<BeliefState<F>>, BamdpError> {
    let keyer = BeliefKeyer::lossless();
    let prior = BeliefState::from_prior(mdp);
    let mut frontier: Vec<(usize, BeliefState<F>)> = mdp
        .initial_dist()
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > F::zero())
        .map(|(s, _)| (s, prior.clone()))
        .collect();
    let mut seen_nodes: HashMap<(usize, BeliefKey), ()> = HashMap::new();
    let mut beliefs: HashMap<BeliefKey, BeliefState<F>> = HashMap::new();
    beliefs.insert(keyer.key(&prior), prior);
    for _ in 0..depth {
        let mut next = Vec::new();
        for (s, b) in frontier {
            if mdp.is_terminal(s) {
                continue;
            }
            for a in 0..mdp.num_actions() {
                for (sn, _, bn) in bayesian_transition(&b, s, a, mdp)? {
                    let k = keyer.key(&bn);
                    if seen_nodes.insert((sn, k.clone()), ()).is_none() {
                        beliefs.entry(k).or_insert_with(|| bn.clone());
                        next.push((sn, bn));
                    }
                }
            }
        }
        frontier = next;
    }
    let mut out: Vec<_> = beliefs.into_values().collect();
    out.sort_by(|x, y| x.prob(0).partial_cmp(&y.prob(0)).unwrap_or(std::cmp::Ordering::Equal));
    Ok(out)
}
