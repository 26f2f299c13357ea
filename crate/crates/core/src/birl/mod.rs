//! Contextual Bayesian IRL with a Boltzmann expert over successor-feature
//! Q-values and a Gaussian prior on the reward weights.
//!
//! Every gradient here is the temperature-scaled one,
//! `g = alpha * grad log p(omega | D) = sum_i sum_theta w_i(theta) sum_t (psi(s_t, a_t) - E_pi psi(s_t, .))
//!      - (omega - omega0) / varsigma0_sq`,
//! so a step is `omega += eta_omega * g`.

mod fit;

use thiserror::Error;

pub use fit::{fit_map, FitConfig, FitOutput};

use crate::bamdp::{trajectory_posterior, BamdpError};
use crate::cmdp::{ContextualMdp, RewardTable, Trajectory};
use crate::linalg::solve_in_place;
use crate::scalar::{dot, log_sum_exp, norm, Scalar};
use crate::sf::{SfError, SuccessorTable};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BirlError {
    #[error("non-finite Boltzmann logit at state {s}, context {theta}")]
    NonFiniteLogit { s: usize, theta: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("reward fit diverged at step {step}: gradient norm {grad_norm}")]
    Diverged { step: usize, grad_norm: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Sf(#[from] SfError),
    #[error(transparent)]
    Bamdp(#[from] BamdpError),
}

/// Reward weights with their Gaussian prior and Boltzmann temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardParams<F> {
    pub omega: Vec<F>,
    pub omega0: Vec<F>,
    pub sigma0_sq: F,
    pub alpha: F,
    /// Reward-model variance; carried for the predictive, unused by the MAP.
    pub sigma_sq: F,
    pub eta_omega: F,
}

impl<F: Scalar> RewardParams<F> {
    /// Starts at the prior mean `omega0 = 0`. The prior is given through
    /// `varsigma0_sq = sigma0_sq / alpha`, the quantity the update uses.
    pub fn new(dim: usize, alpha: F, varsigma0_sq: F, eta_omega: F) -> Result<Self, BirlError> {
        let p = Self {
            omega: vec![F::zero(); dim],
            omega0: vec![F::zero(); dim],
            sigma0_sq: varsigma0_sq * alpha,
            alpha,
            sigma_sq: F::one(),
            eta_omega,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn varsigma0_sq(&self) -> F {
        self.sigma0_sq / self.alpha
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    pub fn validate(&self) -> Result<(), BirlError> {
        if !(self.alpha > F::zero() && self.alpha.is_finite()) {
            return Err(BirlError::InvalidParams(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.sigma0_sq > F::zero() && self.sigma0_sq.is_finite()) {
            return Err(BirlError::InvalidParams(format!("sigma0_sq must be positive, got {}", self.sigma0_sq)));
        }
        if self.eta_omega < F::zero() {
            return Err(BirlError::InvalidParams(format!("eta_omega must be nonnegative, got {}", self.eta_omega)));
        }
        if self.omega0.len() != self.omega.len() {
            return Err(BirlError::DimensionMismatch { expected: self.omega.len(), got: self.omega0.len() });
        }
        Ok(())
    }
}

/// MAP estimate with optional curvature.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceResult<F> {
    pub omega_map: Vec<F>,
    /// Negative Hessian of the log-posterior at the MAP, row-major `d x d`.
    pub neg_hessian: Option<Vec<F>>,
    pub converged: bool,
    /// `||g|| / N_expert` at the returned iterate.
    pub final_grad_norm: f64,
    pub steps: usize,
}

/// How a trajectory's context posterior enters the likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ContextWeighting {
    /// `p(theta | tau)` from transitions only; fixed during the fit.
    #[default]
    Transition,
    /// Also multiplies in the Boltzmann action likelihood, so the weights
    /// move with `omega` and the objective is `sum_i log sum_theta p(theta) p(tau_i | theta, omega)`.
    Joint,
}

/// Expert trajectory with its transition-only context posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedTrajectory<F> {
    pub steps: Vec<(usize, usize)>,
    pub final_state: usize,
    pub context_weights: Vec<F>,
}

impl<F: Scalar> WeightedTrajectory<F> {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    /// `(s, a, s', a')` for every step; `a'` is `None` on the last step.
    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize, usize, Option<usize>)> + '_ {
        let h = self.steps.len();
        (0..h).map(move |t| {
            let (s, a) = self.steps[t];
            match self.steps.get(t + 1) {
                Some(&(sn, an)) => (s, a, sn, Some(an)),
                None => (s, a, self.final_state, None),
            }
        })
    }
}

/// Attaches context posteriors. With `latent = false` every trajectory is
/// assigned the prior mode, which collapses the model to one averaged MDP.
pub fn weigh_trajectories<F: Scalar>(
    mdp: &ContextualMdp<F>,
    trajectories: &[Trajectory],
    latent: bool,
) -> Result<Vec<WeightedTrajectory<F>>, BirlError> {
    let nk = mdp.num_contexts();
    let mode = mdp.prior_mode();
    trajectories
        .iter()
        .map(|t| {
            let context_weights = if latent {
                trajectory_posterior(t, mdp)?.probs()
            } else {
                let mut w = vec![F::zero(); nk];
                w[mode] = F::one();
                w
            };
            Ok(WeightedTrajectory { steps: t.steps().to_vec(), final_state: t.final_state(), context_weights })
        })
        .collect()
}

fn check_alpha<F: Scalar>(alpha: F) -> Result<(), BirlError> {
    if alpha > F::zero() {
        Ok(())
    } else {
        Err(BirlError::InvalidParams(format!("alpha must be positive, got {alpha}")))
    }
}

fn logits<F: Scalar>(table: &SuccessorTable<F>, s: usize, theta: usize, omega: &[F], alpha: F) -> Result<Vec<F>, BirlError> {
    if omega.len() != table.dim() {
        return Err(BirlError::DimensionMismatch { expected: table.dim(), got: omega.len() });
    }
    check_alpha(alpha)?;
    let l: Vec<F> = (0..table.num_actions()).map(|a| dot(table.psi(s, a, theta), omega) / alpha).collect();
    if l.iter().any(|x| !x.is_finite()) {
        return Err(BirlError::NonFiniteLogit { s, theta });
    }
    Ok(l)
}

fn softmax<F: Scalar>(logits: &[F]) -> Vec<F> {
    let m = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let e: Vec<F> = logits.iter().map(|x| (*x - m).exp()).collect();
    let z: F = e.iter().copied().sum();
    e.into_iter().map(|x| x / z).collect()
}

/// `softmax_a(psi(s, a, theta) . omega / alpha)`.
pub fn boltzmann_policy<F: Scalar>(
    table: &SuccessorTable<F>,
    s: usize,
    theta: usize,
    omega: &[F],
    alpha: F,
) -> Result<Vec<F>, BirlError> {
    Ok(softmax(&logits(table, s, theta, omega, alpha)?))
}

/// `log z = log sum_a exp(psi(s, a, theta) . omega / alpha)`.
pub fn log_normalizer<F: Scalar>(
    table: &SuccessorTable<F>,
    s: usize,
    theta: usize,
    omega: &[F],
    alpha: F,
) -> Result<F, BirlError> {
    Ok(log_sum_exp(&logits(table, s, theta, omega, alpha)?))
}

/// `E_{a ~ boltzmann}[psi(s, a, theta)]`, which equals `alpha * grad_omega log z`.
pub fn expected_sf<F: Scalar>(
    table: &SuccessorTable<F>,
    s: usize,
    theta: usize,
    omega: &[F],
    alpha: F,
) -> Result<Vec<F>, BirlError> {
    let p = boltzmann_policy(table, s, theta, omega, alpha)?;
    let mut out = vec![F::zero(); table.dim()];
    for (a, pa) in p.iter().enumerate() {
        for (o, x) in out.iter_mut().zip(table.psi(s, a, theta)) {
            *o += *pa * *x;
        }
    }
    Ok(out)
}

/// Per-trajectory gradient `sum_theta w(theta) sum_t (psi - E psi)` and
/// log-likelihood contribution under the chosen weighting.
fn trajectory_terms<F: Scalar>(
    table: &SuccessorTable<F>,
    traj: &WeightedTrajectory<F>,
    omega: &[F],
    alpha: F,
    weighting: ContextWeighting,
) -> Result<(Vec<F>, F), BirlError> {
    let d = table.dim();
    let nk = traj.context_weights.len();
    let mut per_ctx_grad = vec![F::zero(); nk * d];
    let mut per_ctx_ll = vec![F::zero(); nk];
    for theta in 0..nk {
        if traj.context_weights[theta] <= F::zero() {
            continue;
        }
        let g = &mut per_ctx_grad[theta * d..(theta + 1) * d];
        for &(s, a) in &traj.steps {
            let l = logits(table, s, theta, omega, alpha)?;
            let p = softmax(&l);
            per_ctx_ll[theta] += l[a] - log_sum_exp(&l);
            for (b, pb) in p.iter().enumerate() {
                let coef = if b == a { F::one() - *pb } else { -*pb };
                if coef != F::zero() {
                    for (gk, x) in g.iter_mut().zip(table.psi(s, b, theta)) {
                        *gk += coef * *x;
                    }
                }
            }
        }
    }
    let (weights, ll) = match weighting {
        ContextWeighting::Transition => {
            let ll = (0..nk)
                .filter(|&k| traj.context_weights[k] > F::zero())
                .map(|k| traj.context_weights[k] * per_ctx_ll[k])
                .sum();
            (traj.context_weights.clone(), ll)
        }
        ContextWeighting::Joint => {
            let logw: Vec<F> = (0..nk)
                .map(|k| {
                    if traj.context_weights[k] > F::zero() {
                        traj.context_weights[k].ln() + per_ctx_ll[k]
                    } else {
                        F::neg_infinity()
                    }
                })
                .collect();
            let z = log_sum_exp(&logw);
            (logw.iter().map(|x| (*x - z).exp()).collect(), z)
        }
    };
    let mut grad = vec![F::zero(); d];
    for theta in 0..nk {
        if weights[theta] > F::zero() {
            for (o, x) in grad.iter_mut().zip(&per_ctx_grad[theta * d..(theta + 1) * d]) {
                *o += weights[theta] * *x;
            }
        }
    }
    Ok((grad, ll))
}

fn prior_terms<F: Scalar>(params: &RewardParams<F>) -> (Vec<F>, F) {
    let vs = params.varsigma0_sq();
    let diff: Vec<F> = params.omega.iter().zip(&params.omega0).map(|(w, w0)| *w - *w0).collect();
    let log_prior = -dot(&diff, &diff) / (F::lit(2.0) * params.sigma0_sq);
    (diff.into_iter().map(|x| -x / vs).collect(), log_prior)
}

/// Exact scaled gradient over the whole dataset and the log-posterior (up to a constant).
pub fn full_gradient<F: Scalar>(
    table: &SuccessorTable<F>,
    data: &[WeightedTrajectory<F>],
    params: &RewardParams<F>,
    weighting: ContextWeighting,
) -> Result<(Vec<F>, F), BirlError> {
    let (mut g, mut lp) = prior_terms(params);
    for traj in data {
        let (gi, li) = trajectory_terms(table, traj, &params.omega, params.alpha, weighting)?;
        for (o, x) in g.iter_mut().zip(&gi) {
            *o += *x;
        }
        lp += li;
    }
    Ok((g, lp))
}

/// Log-posterior `sum log-likelihood - ||omega - omega0||^2 / (2 sigma0_sq)` up to a constant.
pub fn log_posterior<F: Scalar>(
    table: &SuccessorTable<F>,
    data: &[WeightedTrajectory<F>],
    params: &RewardParams<F>,
    weighting: ContextWeighting,
) -> Result<F, BirlError> {
    let (_, mut lp) = prior_terms(params);
    for traj in data {
        lp += trajectory_terms(table, traj, &params.omega, params.alpha, weighting)?.1;
    }
    Ok(lp)
}

/// Minibatch estimate of the scaled gradient. Each trajectory's per-step
/// mean is scaled by `N_expert * H_i`, then averaged over the batch, which is
/// unbiased for the full sum and exact when the batch is the whole dataset.
pub fn stochastic_gradient<F: Scalar>(
    table: &SuccessorTable<F>,
    data: &[WeightedTrajectory<F>],
    batch: &[usize],
    n_expert: usize,
    params: &RewardParams<F>,
    weighting: ContextWeighting,
) -> Result<(Vec<F>, F), BirlError> {
    let (mut g, _) = prior_terms(params);
    if batch.is_empty() {
        return Ok((g, F::zero()));
    }
    let n = F::from_usize_lossy(n_expert);
    let scale = n / F::from_usize_lossy(batch.len());
    let mut ll = F::zero();
    for &i in batch {
        let traj = &data[i];
        if traj.steps.is_empty() {
            continue;
        }
        // N * H_i * (sum_t / H_i) reduces to N * sum_t
        let (gi, li) = trajectory_terms(table, traj, &params.omega, params.alpha, weighting)?;
        for (o, x) in g.iter_mut().zip(&gi) {
            *o += scale * *x;
        }
        ll += scale * li;
    }
    Ok((g, ll))
}

/// One step of the result of [`map_gradient_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientStep<F> {
    pub omega: Vec<F>,
    /// Norm of the unclipped scaled gradient.
    pub grad_norm: F,
    /// Minibatch estimate of the data log-likelihood.
    pub loglik: F,
}

/// `omega + eta_omega * g` with `g` from [`stochastic_gradient`], optionally
/// rescaled to norm at most `clip`.
#[allow(clippy::too_many_arguments)]
pub fn map_gradient_step<F: Scalar>(
    table: &SuccessorTable<F>,
    data: &[WeightedTrajectory<F>],
    batch: &[usize],
    n_expert: usize,
    params: &RewardParams<F>,
    weighting: ContextWeighting,
    clip: Option<F>,
) -> Result<GradientStep<F>, BirlError> {
    if params.omega.len() != table.dim() {
        return Err(BirlError::DimensionMismatch { expected: table.dim(), got: params.omega.len() });
    }
    let (g, loglik) = stochastic_gradient(table, data, batch, n_expert, params, weighting)?;
    let grad_norm = norm(&g);
    let factor = match clip {
        Some(c) if grad_norm > c => c / grad_norm,
        _ => F::one(),
    };
    let omega = params.omega.iter().zip(&g).map(|(w, gk)| *w + params.eta_omega * factor * *gk).collect();
    Ok(GradientStep { omega, grad_norm, loglik })
}

/// `-grad^2 log p(omega | D) = sum_i sum_theta w_i(theta) sum_t Cov_pi[psi] / alpha^2 + I / sigma0_sq`,
/// exact for [`ContextWeighting::Transition`].
pub fn neg_hessian<F: Scalar>(
    table: &SuccessorTable<F>,
    data: &[WeightedTrajectory<F>],
    params: &RewardParams<F>,
) -> Result<Vec<F>, BirlError> {
    let d = table.dim();
    let mut h = vec![F::zero(); d * d];
    let a2 = params.alpha * params.alpha;
    for traj in data {
        for (theta, &w) in traj.context_weights.iter().enumerate() {
            if w <= F::zero() {
                continue;
            }
            for &(s, _) in &traj.steps {
                let p = boltzmann_policy(table, s, theta, &params.omega, params.alpha)?;
                let mean = expected_sf(table, s, theta, &params.omega, params.alpha)?;
                for (b, pb) in p.iter().enumerate() {
                    let c: Vec<F> = table.psi(s, b, theta).iter().zip(&mean).map(|(x, m)| *x - *m).collect();
                    let coef = w * *pb / a2;
                    for i in 0..d {
                        if c[i] == F::zero() {
                            continue;
                        }
                        for j in 0..d {
                            h[i * d + j] += coef * c[i] * c[j];
                        }
                    }
                }
            }
        }
    }
    for i in 0..d {
        h[i * d + i] += F::one() / params.sigma0_sq;
    }
    Ok(h)
}

/// Newton's method with backtracking on a fixed successor table; used as the
/// deterministic oracle for the stochastic fit. `tol` bounds `||g|| / N`.
pub fn solve_map<F: Scalar>(
    table: &SuccessorTable<F>,
    data: &[WeightedTrajectory<F>],
    params: &RewardParams<F>,
    weighting: ContextWeighting,
    tol: f64,
    max_iter: usize,
) -> Result<LaplaceResult<F>, BirlError> {
    params.validate()?;
    let d = params.dim();
    let n = data.len().max(1) as f64;
    let mut p = params.clone();
    let (mut g, mut lp) = full_gradient(table, data, &p, weighting)?;
    let mut steps = 0;
    while steps < max_iter && norm(&g).as_f64() / n > tol {
        let mut h = neg_hessian(table, data, &p)?;
        // Newton direction on log p: H^{-1} grad log p = H^{-1} g / alpha
        let mut dir: Vec<F> = g.iter().map(|x| *x / p.alpha).collect();
        if solve_in_place(&mut h, d, &mut dir, 1).is_none() {
            dir = g.clone();
        }
        let mut step = F::one();
        let mut accepted = false;
        for _ in 0..60 {
            let mut trial = p.clone();
            for (w, dk) in trial.omega.iter_mut().zip(&dir) {
                *w += step * *dk;
            }
            let tl = log_posterior(table, data, &trial, weighting)?;
            if tl >= lp {
                p = trial;
                accepted = true;
                break;
            }
            step = step * F::lit(0.5);
        }
        steps += 1;
        let (g2, lp2) = full_gradient(table, data, &p, weighting)?;
        g = g2;
        lp = lp2;
        if !accepted {
            break;
        }
    }
    let final_grad_norm = norm(&g).as_f64() / n;
    Ok(LaplaceResult {
        neg_hessian: Some(neg_hessian(table, data, &p)?),
        omega_map: p.omega,
        converged: final_grad_norm <= tol,
        final_grad_norm,
        steps,
    })
}

/// Predictive mean reward `nu(s, a) . omega_map` for every cell.
pub fn posterior_predictive_reward_raw<F: Scalar>(
    result: &LaplaceResult<F>,
    mdp: &ContextualMdp<F>,
) -> Result<RewardTable<F>, BirlError> {
    if result.omega_map.len() != mdp.feature_dim() {
        return Err(BirlError::DimensionMismatch { expected: mdp.feature_dim(), got: result.omega_map.len() });
    }
    RewardTable::from_weights(mdp, &result.omega_map)
        .map_err(|e| BirlError::InvalidParams(e.to_string()))
}

/// Context-blind baseline: each state's reward is its share of all expert
/// state visits, identical across actions.
pub fn visitation_frequency_reward<F: Scalar>(mdp: &ContextualMdp<F>, trajectories: &[Trajectory]) -> RewardTable<F> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut counts = vec![0usize; ns];
    for t in trajectories {
        for &(s, _) in t.steps() {
            counts[s] += 1;
        }
        counts[t.final_state()] += 1;
    }
    let total = counts.iter().sum::<usize>().max(1);
    let mut r = RewardTable::zeros(ns, na);
    for s in 0..ns {
        for a in 0..na {
            r.set(s, a, F::from_usize_lossy(counts[s]) / F::from_usize_lossy(total));
        }
    }
    r
}
