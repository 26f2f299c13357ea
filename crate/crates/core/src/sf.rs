//! Tabular contextual successor features `psi[s, a, theta] in R^d` with a
//! target copy for off-policy bootstrapping.
//!
//! `Q(s, a, theta; omega) = psi[s, a, theta] . omega`.

use thiserror::Error;

use crate::cmdp::{ContextualMdp, StochasticPolicy, TabularPolicy};
use crate::io::SfRow;
use crate::linalg::solve_in_place;
use crate::scalar::{argmax_lowest, dot, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SfError {
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("successor feature system is singular")]
    SingularSystem,
}

/// How bootstrapping treats terminal next states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TerminalMode {
    /// Terminal states loop on themselves forever; their rows are pinned to
    /// the closed-form geometric sum.
    #[default]
    SelfLoop,
    /// Terminal states contribute nothing after the transition into them.
    ZeroContinuation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessorTable<F> {
    num_states: usize,
    num_actions: usize,
    num_contexts: usize,
    dim: usize,
    gamma: F,
    psi: Vec<F>,
    psi_target: Vec<F>,
    terminal: Vec<bool>,
    terminal_mode: TerminalMode,
    pub target_sync_period: usize,
    pub learning_rate: F,
    since_sync: usize,
}

impl<F: Scalar> SuccessorTable<F> {
    /// Zero table with terminal rows pinned.
    pub fn new(mdp: &ContextualMdp<F>, learning_rate: F, target_sync_period: usize, terminal_mode: TerminalMode) -> Self {
        let (ns, na, nk, d) = (mdp.num_states(), mdp.num_actions(), mdp.num_contexts(), mdp.feature_dim());
        let mut t = Self {
            num_states: ns,
            num_actions: na,
            num_contexts: nk,
            dim: d,
            gamma: mdp.gamma(),
            psi: vec![F::zero(); ns * na * nk * d],
            psi_target: Vec::new(),
            terminal: mdp.terminal_mask().to_vec(),
            terminal_mode,
            target_sync_period: target_sync_period.max(1),
            learning_rate,
            since_sync: 0,
        };
        let cont = mdp.gamma() / (F::one() - mdp.gamma());
        for s in (0..ns).filter(|&s| mdp.is_terminal(s)) {
            let stay = mdp.features(s, 0).to_vec();
            for a in 0..na {
                let nu = mdp.features(s, a);
                for theta in 0..nk {
                    let o = t.offset(s, a, theta);
                    for k in 0..d {
                        t.psi[o + k] = match terminal_mode {
                            TerminalMode::SelfLoop => nu[k] + cont * stay[k],
                            TerminalMode::ZeroContinuation => nu[k],
                        };
                    }
                }
            }
        }
        t.psi_target = t.psi.clone();
        t
    }

    #[inline]
    fn offset(&self, s: usize, a: usize, theta: usize) -> usize {
        ((s * self.num_actions + a) * self.num_contexts + theta) * self.dim
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }
    pub fn num_actions(&self) -> usize {
        self.num_actions
    }
    pub fn num_contexts(&self) -> usize {
        self.num_contexts
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn terminal_mode(&self) -> TerminalMode {
        self.terminal_mode
    }

    #[inline]
    pub fn psi(&self, s: usize, a: usize, theta: usize) -> &[F] {
        let o = self.offset(s, a, theta);
        &self.psi[o..o + self.dim]
    }

    #[inline]
    pub fn psi_target(&self, s: usize, a: usize, theta: usize) -> &[F] {
        let o = self.offset(s, a, theta);
        &self.psi_target[o..o + self.dim]
    }

    pub fn set_psi(&mut self, s: usize, a: usize, theta: usize, value: &[F]) {
        let o = self.offset(s, a, theta);
        self.psi[o..o + self.dim].copy_from_slice(value);
    }

    #[inline]
    pub fn q_value(&self, s: usize, a: usize, theta: usize, omega: &[F]) -> F {
        dot(self.psi(s, a, theta), omega)
    }

    pub fn q_row(&self, s: usize, theta: usize, omega: &[F]) -> Vec<F> {
        (0..self.num_actions).map(|a| self.q_value(s, a, theta, omega)).collect()
    }

    /// Greedy action under `omega`, lowest index on ties.
    pub fn greedy_action(&self, s: usize, theta: usize, omega: &[F]) -> usize {
        argmax_lowest(&self.q_row(s, theta, omega))
    }

    fn target_greedy_action(&self, s: usize, theta: usize, omega: &[F]) -> usize {
        let q: Vec<F> = (0..self.num_actions).map(|a| dot(self.psi_target(s, a, theta), omega)).collect();
        argmax_lowest(&q)
    }

    pub fn greedy_policy(&self, theta: usize, omega: &[F]) -> TabularPolicy {
        TabularPolicy { actions: (0..self.num_states).map(|s| self.greedy_action(s, theta, omega)).collect() }
    }

    fn check(&self, s: usize, a: usize, s_next: usize, theta: usize) -> Result<(), SfError> {
        if s >= self.num_states || s_next >= self.num_states || a >= self.num_actions || theta >= self.num_contexts {
            return Err(SfError::IndexOutOfRange(format!("(s={s}, a={a}, s'={s_next}, theta={theta})")));
        }
        Ok(())
    }

    /// Semi-gradient step of `psi[s, a, theta]` towards `nu(s, a) + gamma * boot`
    /// with step size `learning_rate * weight`.
    fn td_step(&mut self, mdp: &ContextualMdp<F>, s: usize, a: usize, theta: usize, boot: Option<(usize, usize, bool)>, weight: F) {
        if self.terminal[s] {
            return;
        }
        let step = self.learning_rate * weight;
        if step == F::zero() {
            return;
        }
        let nu = mdp.features(s, a);
        let o = self.offset(s, a, theta);
        let g = self.gamma;
        match boot {
            Some((sn, an, from_target)) => {
                let ob = self.offset(sn, an, theta);
                for k in 0..self.dim {
                    let b = if from_target { self.psi_target[ob + k] } else { self.psi[ob + k] };
                    let cur = self.psi[o + k];
                    self.psi[o + k] = cur + step * (nu[k] + g * b - cur);
                }
            }
            None => {
                for k in 0..self.dim {
                    let cur = self.psi[o + k];
                    self.psi[o + k] = cur + step * (nu[k] - cur);
                }
            }
        }
    }

    fn bootstrap_terminal(&self, s_next: usize) -> Option<Option<(usize, usize, bool)>> {
        if !self.terminal[s_next] {
            return None;
        }
        Some(match self.terminal_mode {
            TerminalMode::SelfLoop => Some((s_next, 0, false)),
            TerminalMode::ZeroContinuation => None,
        })
    }

    /// On-policy update from an expert transition `(s, a, s', a')`.
    ///
    /// `a_next` may be `None` only when `s'` is terminal; a truncated
    /// trajectory's final transition has no on-policy target and is skipped.
    /// Returns whether an update was applied.
    pub fn expert_td_update(
        &mut self,
        mdp: &ContextualMdp<F>,
        s: usize,
        a: usize,
        s_next: usize,
        a_next: Option<usize>,
        theta: usize,
        weight: F,
    ) -> Result<bool, SfError> {
        self.check(s, a, s_next, theta)?;
        let boot = match (self.bootstrap_terminal(s_next), a_next) {
            (Some(b), _) => b,
            (None, Some(an)) if an < self.num_actions => Some((s_next, an, false)),
            (None, Some(an)) => return Err(SfError::IndexOutOfRange(format!("a'={an}"))),
            (None, None) => return Ok(false),
        };
        self.td_step(mdp, s, a, theta, boot, weight);
        Ok(true)
    }

    /// Off-policy update: `a' = argmax_a' psi_target[s', a', theta] . omega`,
    /// bootstrapping from the same target row. Picking `a'` from the live table
    /// instead lets the choice flip mid-sweep and admits non-greedy fixed points.
    pub fn simulator_td_update(
        &mut self,
        mdp: &ContextualMdp<F>,
        s: usize,
        a: usize,
        s_next: usize,
        theta: usize,
        omega: &[F],
        weight: F,
    ) -> Result<(), SfError> {
        self.check(s, a, s_next, theta)?;
        if omega.len() != self.dim {
            return Err(SfError::DimensionMismatch { expected: self.dim, got: omega.len() });
        }
        let boot = match self.bootstrap_terminal(s_next) {
            Some(b) => b,
            None => Some((s_next, self.target_greedy_action(s_next, theta, omega), true)),
        };
        self.td_step(mdp, s, a, theta, boot, weight);
        Ok(())
    }

    pub fn sync_target(&mut self) {
        self.psi_target.copy_from_slice(&self.psi);
        self.since_sync = 0;
    }

    /// Counts one training step and syncs the target every `target_sync_period` steps.
    pub fn tick(&mut self) -> bool {
        self.since_sync += 1;
        if self.since_sync >= self.target_sync_period {
            self.sync_target();
            true
        } else {
            false
        }
    }

    /// `max_k |nu(s,a) + gamma psi[s',a'] - psi[s,a]|` over the given transitions.
    pub fn bellman_residual(
        &self,
        mdp: &ContextualMdp<F>,
        transitions: impl IntoIterator<Item = (usize, usize, usize, usize, usize)>,
    ) -> F {
        let mut worst = F::zero();
        for (s, a, sn, an, theta) in transitions {
            if self.terminal[s] {
                continue;
            }
            let nu = mdp.features(s, a);
            let cur = self.psi(s, a, theta);
            let next = self.psi(sn, an, theta);
            let cont = if self.terminal[sn] && self.terminal_mode == TerminalMode::ZeroContinuation {
                F::zero()
            } else {
                self.gamma
            };
            for k in 0..self.dim {
                worst = worst.max((nu[k] + cont * next[k] - cur[k]).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> F {
        self.psi.iter().fold(F::zero(), |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.psi.iter().all(|x| x.is_finite())
    }

    pub fn to_rows(&self) -> Vec<SfRow> {
        let mut rows = Vec::with_capacity(self.psi.len());
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                for theta in 0..self.num_contexts {
                    for (dim, v) in self.psi(s, a, theta).iter().enumerate() {
                        rows.push(SfRow { s, a, theta, dim, value: v.as_f64() });
                    }
                }
            }
        }
        rows
    }

    /// Overwrites `psi` (and the target) from CSV rows.
    pub fn load_rows(&mut self, rows: &[SfRow]) -> Result<(), SfError> {
        for r in rows {
            if r.s >= self.num_states || r.a >= self.num_actions || r.theta >= self.num_contexts || r.dim >= self.dim {
                return Err(SfError::IndexOutOfRange(format!("{r:?}")));
            }
            let o = self.offset(r.s, r.a, r.theta);
            self.psi[o + r.dim] = F::lit(r.value);
        }
        self.sync_target();
        Ok(())
    }
}

/// Exact successor features of `policy` on the `theta` slice:
/// `psi(s,a) = nu(s,a) + gamma sum_s' p(s'|s,a) sum_a' pi(a'|s') psi(s',a')`,
/// solved densely over state-action pairs. Rows indexed `(s * A + a) * d + k`.
pub fn solve_sf_exact<F: Scalar>(
    mdp: &ContextualMdp<F>,
    policy: &StochasticPolicy<F>,
    theta: usize,
) -> Result<Vec<F>, SfError> {
    let (ns, na, d) = (mdp.num_states(), mdp.num_actions(), mdp.feature_dim());
    if theta >= mdp.num_contexts() {
        return Err(SfError::IndexOutOfRange(format!("theta {theta}")));
    }
    if policy.probs.len() != ns {
        return Err(SfError::DimensionMismatch { expected: ns, got: policy.probs.len() });
    }
    let n = ns * na;
    let g = mdp.gamma();
    let mut a_mat = vec![F::zero(); n * n];
    let mut rhs = vec![F::zero(); n * d];
    for s in 0..ns {
        for a in 0..na {
            let i = s * na + a;
            a_mat[i * n + i] += F::one();
            rhs[i * d..(i + 1) * d].copy_from_slice(mdp.features(s, a));
            for (sn, &p) in mdp.transition_row(s, a, theta).iter().enumerate() {
                if p == F::zero() {
                    continue;
                }
                for an in 0..na {
                    let pa = policy.probs[sn][an];
                    if pa != F::zero() {
                        a_mat[i * n + sn * na + an] -= g * p * pa;
                    }
                }
            }
        }
    }
    solve_in_place(&mut a_mat, n, &mut rhs, d).ok_or(SfError::SingularSystem)?;
    Ok(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::build_three_state;

    const G: f64 = 0.9;

    #[test]
    fn exact_solve_reproduces_analytic_three_state_features() {
        let env = build_three_state::<f64>(G).unwrap();
        // expert in context 0 picks action 0
        let pol = StochasticPolicy::from_deterministic(&TabularPolicy { actions: vec![0, 0, 0] }, 2);
        let psi = solve_sf_exact(&env.mdp, &pol, 0).unwrap();
        let row = |s: usize, a: usize| &psi[(s * 2 + a) * 3..(s * 2 + a + 1) * 3];
        let c = G / (1.0 - G);
        for (got, want) in row(0, 0).iter().zip([1.0, c, 0.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        for (got, want) in row(0, 1).iter().zip([1.0, 0.0, c]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((row(1, 1)[1] - 1.0 / (1.0 - G)).abs() < 1e-12);
    }

    #[test]
    fn one_hot_rows_sum_to_horizon_mass() {
        let env = build_three_state::<f64>(G).unwrap();
        let pol = StochasticPolicy::uniform(3, 2);
        let psi = solve_sf_exact(&env.mdp, &pol, 1).unwrap();
        for row in psi.chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0 / (1.0 - G)).abs() < 1e-10);
        }
    }

    #[test]
    fn expert_td_converges_to_fixed_point() {
        let env = build_three_state::<f64>(G).unwrap();
        let mut t = SuccessorTable::new(&env.mdp, 0.5, 1, TerminalMode::SelfLoop);
        for _ in 0..200 {
            t.expert_td_update(&env.mdp, 0, 0, 1, None, 0, 1.0).unwrap();
        }
        let c = G / (1.0 - G);
        let want = [1.0, c, 0.0];
        for k in 0..3 {
            assert!((t.psi(0, 0, 0)[k] - want[k]).abs() < 1e-10);
        }
        // terminal rows are pinned to the geometric sum
        assert!((t.psi(1, 0, 0)[1] - 1.0 / (1.0 - G)).abs() < 1e-12);
    }

    #[test]
    fn zero_continuation_stops_at_terminal() {
        let env = build_three_state::<f64>(G).unwrap();
        let mut t = SuccessorTable::new(&env.mdp, 1.0, 1, TerminalMode::ZeroContinuation);
        t.expert_td_update(&env.mdp, 0, 0, 1, None, 0, 1.0).unwrap();
        assert_eq!(t.psi(0, 0, 0), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_step_size_leaves_table_unchanged() {
        let env = build_three_state::<f64>(G).unwrap();
        let mut t = SuccessorTable::new(&env.mdp, 0.0, 1, TerminalMode::SelfLoop);
        let before = t.clone();
        t.expert_td_update(&env.mdp, 0, 1, 2, None, 1, 1.0).unwrap();
        t.simulator_td_update(&env.mdp, 0, 0, 1, 0, &[0.0, 1.0, -1.0], 1.0).unwrap();
        assert_eq!(t, before);
    }

    #[test]
    fn greedy_ties_pick_lowest_action() {
        let env = build_three_state::<f64>(G).unwrap();
        let t = SuccessorTable::new(&env.mdp, 0.1, 1, TerminalMode::SelfLoop);
        assert_eq!(t.greedy_action(0, 0, &[0.0, 1.0, -1.0]), 0);
    }

    #[test]
    fn target_syncs_only_on_period() {
        let env = build_three_state::<f64>(G).unwrap();
        let mut t = SuccessorTable::new(&env.mdp, 0.5, 3, TerminalMode::SelfLoop);
        let frozen = t.psi_target(0, 0, 0).to_vec();
        t.expert_td_update(&env.mdp, 0, 0, 1, None, 0, 1.0).unwrap();
        assert!(!t.tick());
        assert!(!t.tick());
        assert_eq!(t.psi_target(0, 0, 0), frozen.as_slice());
        assert!(t.tick());
        assert_eq!(t.psi_target(0, 0, 0), t.psi(0, 0, 0));
    }

    #[test]
    fn index_errors_are_reported() {
        let env = build_three_state::<f64>(G).unwrap();
        let mut t = SuccessorTable::new(&env.mdp, 0.5, 1, TerminalMode::SelfLoop);
        assert!(matches!(t.expert_td_update(&env.mdp, 7, 0, 1, None, 0, 1.0), Err(SfError::IndexOutOfRange(_))));
        assert!(matches!(
            t.simulator_td_update(&env.mdp, 0, 0, 1, 0, &[1.0], 1.0),
            Err(SfError::DimensionMismatch { expected: 3, got: 1 })
        ));
    }
}
