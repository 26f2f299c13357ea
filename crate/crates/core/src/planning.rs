//! Exact planning on a single context slice: value iteration and dense
//! Markov policy evaluation. Used for expert policies and as test oracles.
//!
//! Returns are `sum_t gamma^t r(s_t, a_t)` with `t` starting at 0. Terminal
//! states are absorbing self-loops that keep collecting their own reward.

use crate::cmdp::{CmdpError, ContextualMdp, RewardTable, StochasticPolicy, TabularPolicy};
use crate::linalg::solve_in_place;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct ValueResult<F> {
    pub values: Vec<F>,
    /// Indexed `s * A + a`.
    pub q: Vec<F>,
    pub policy: TabularPolicy,
    pub iterations: usize,
}

fn check_reward<F: Scalar>(mdp: &ContextualMdp<F>, reward: &RewardTable<F>) -> Result<(), CmdpError> {
    if reward.num_states() != mdp.num_states() || reward.num_actions() != mdp.num_actions() {
        return Err(CmdpError::DimensionMismatch {
            expected: mdp.num_states() * mdp.num_actions(),
            got: reward.values().len(),
        });
    }
    Ok(())
}

/// Lowest action whose value is within `tol` of the row maximum.
pub fn greedy_action<F: Scalar>(row: &[F], tol: F) -> usize {
    let best = row.iter().copied().fold(F::neg_infinity(), F::max);
    row.iter().position(|&q| q >= best - tol).unwrap_or(0)
}

/// One Bellman backup of `q` for state `s` given state values `v`.
fn backup<F: Scalar>(mdp: &ContextualMdp<F>, theta: usize, reward: &RewardTable<F>, v: &[F], s: usize, a: usize) -> F {
    let row = mdp.transition_row(s, a, theta);
    let mut next = F::zero();
    for (sn, &p) in row.iter().enumerate() {
        if p > F::zero() {
            next += p * v[sn];
        }
    }
    reward.get(s, a) + mdp.gamma() * next
}

/// Value iteration on the `theta` slice until the sup-norm change is below `tol`.
/// Greedy ties are broken towards the lowest action index.
pub fn value_iteration<F: Scalar>(
    mdp: &ContextualMdp<F>,
    theta: usize,
    reward: &RewardTable<F>,
    tol: F,
    max_iter: usize,
) -> Result<ValueResult<F>, CmdpError> {
    check_reward(mdp, reward)?;
    if theta >= mdp.num_contexts() {
        return Err(CmdpError::IndexOutOfRange(format!("theta {theta}")));
    }
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut v = vec![F::zero(); ns];
    let mut q = vec![F::zero(); ns * na];
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        let mut delta = F::zero();
        for s in 0..ns {
            let mut best = F::neg_infinity();
            for a in 0..na {
                let val = backup(mdp, theta, reward, &v, s, a);
                q[s * na + a] = val;
                best = best.max(val);
            }
            delta = delta.max((best - v[s]).abs());
            v[s] = best;
        }
        if delta < tol {
            break;
        }
    }
    for s in 0..ns {
        for a in 0..na {
            q[s * na + a] = backup(mdp, theta, reward, &v, s, a);
        }
    }
    let scale = v.iter().fold(F::one(), |m, x| m.max(x.abs()));
    let tie_tol = F::lit(1e-10) * scale;
    let policy = TabularPolicy {
        actions: (0..ns).map(|s| greedy_action(&q[s * na..(s + 1) * na], tie_tol)).collect(),
    };
    Ok(ValueResult { values: v, q, policy, iterations })
}

/// Exact state values of a stochastic Markov policy on the `theta` slice:
/// solves `(I - gamma P_pi) V = r_pi`.
pub fn evaluate_markov_policy<F: Scalar>(
    mdp: &ContextualMdp<F>,
    theta: usize,
    policy: &StochasticPolicy<F>,
    reward: &RewardTable<F>,
) -> Result<Vec<F>, CmdpError> {
    check_reward(mdp, reward)?;
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    if policy.probs.len() != ns {
        return Err(CmdpError::DimensionMismatch { expected: ns, got: policy.probs.len() });
    }
    let gamma = mdp.gamma();
    let mut a_mat = vec![F::zero(); ns * ns];
    let mut rhs = vec![F::zero(); ns];
    for s in 0..ns {
        a_mat[s * ns + s] = F::one();
        for a in 0..na {
            let pa = policy.probs[s][a];
            if pa == F::zero() {
                continue;
            }
            rhs[s] += pa * reward.get(s, a);
            for (sn, &p) in mdp.transition_row(s, a, theta).iter().enumerate() {
                a_mat[s * ns + sn] -= gamma * pa * p;
            }
        }
    }
    solve_in_place(&mut a_mat, ns, &mut rhs, 1)
        .ok_or_else(|| CmdpError::InvalidArgument("singular policy evaluation system".into()))?;
    Ok(rhs)
}

/// Expected return from `p(s0)` averaged over the context prior, for a
/// Markov policy shared by every context.
pub fn prior_averaged_return<F: Scalar>(
    mdp: &ContextualMdp<F>,
    policy: &StochasticPolicy<F>,
    reward: &RewardTable<F>,
) -> Result<F, CmdpError> {
    let mut total = F::zero();
    for theta in 0..mdp.num_contexts() {
        let w = mdp.context_prior()[theta];
        if w == F::zero() {
            continue;
        }
        let v = evaluate_markov_policy(mdp, theta, policy, reward)?;
        let start: F = mdp.initial_dist().iter().zip(&v).map(|(&p, &x)| p * x).sum();
        total += w * start;
    }
    Ok(total)
}

/// Start-state value of a per-context Markov policy under the context prior.
pub fn contextual_return<F: Scalar>(
    mdp: &ContextualMdp<F>,
    policies: &[StochasticPolicy<F>],
    reward: &RewardTable<F>,
) -> Result<F, CmdpError> {
    let mut total = F::zero();
    for theta in 0..mdp.num_contexts() {
        let v = evaluate_markov_policy(mdp, theta, &policies[theta], reward)?;
        let start: F = mdp.initial_dist().iter().zip(&v).map(|(&p, &x)| p * x).sum();
        total += mdp.context_prior()[theta] * start;
    }
    Ok(total)
}
