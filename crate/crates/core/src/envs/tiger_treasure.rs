//! Tiger-Treasure: two doors, one hides a tiger and the other gold; a noisy
//! listen action moves the agent to a hint state.
//!
//! Context 0 puts the tiger behind door 1, context 1 behind door 2.

use super::{check_gamma, one_hot_rows, EnvError, EnvKind, Environment};
use crate::cmdp::CmdpBuilder;
use crate::scalar::Scalar;

pub const S0: usize = 0;
pub const T1: usize = 1;
pub const T2: usize = 2;
pub const TIGER: usize = 3;
pub const GOLD: usize = 4;
pub const S_T: usize = 5;

pub const OPEN_1: usize = 0;
pub const OPEN_2: usize = 1;
pub const LISTEN: usize = 2;

pub const R_GOLD: f64 = 10.0;
pub const R_TIGER: f64 = -100.0;
pub const R_LISTEN: f64 = -1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TigerTreasureSpec {
    /// Probability that listening points at the tiger's door; must exceed 0.5.
    pub listen_success: f64,
    pub gamma: f64,
    pub horizon: usize,
}

impl Default for TigerTreasureSpec {
    fn default() -> Self {
        Self { listen_success: 0.85, gamma: 0.99, horizon: 50 }
    }
}

pub fn build_tiger_treasure<F: Scalar>(spec: &TigerTreasureSpec) -> Result<Environment<F>, EnvError> {
    let p = spec.listen_success;
    if !(p > 0.5 && p <= 1.0) {
        return Err(EnvError::InvalidSpec(format!("listen_success must be in (0.5, 1], got {p}")));
    }
    check_gamma(spec.gamma)?;
    let (ns, na) = (6, 3);
    let mut b = CmdpBuilder::<F>::new(ns, na, 2);
    for s in [S0, T1, T2] {
        // context 0: tiger behind door 1
        b.set(s, OPEN_1, 0, TIGER, F::one()).set(s, OPEN_2, 0, GOLD, F::one());
        b.set(s, OPEN_1, 1, GOLD, F::one()).set(s, OPEN_2, 1, TIGER, F::one());
        b.set(s, LISTEN, 0, T1, F::lit(p)).set(s, LISTEN, 0, T2, F::lit(1.0 - p));
        b.set(s, LISTEN, 1, T2, F::lit(p)).set(s, LISTEN, 1, T1, F::lit(1.0 - p));
    }
    for s in [TIGER, GOLD, S_T] {
        for a in 0..na {
            b.set_all_contexts(s, a, S_T);
        }
    }
    b.terminal(S_T)
        .initial_state(S0)
        .context_prior(vec![F::lit(0.5), F::lit(0.5)])
        .gamma(F::lit(spec.gamma))
        .features(ns, one_hot_rows(ns, na));
    let mdp = b.build()?;
    let mut omega = vec![F::zero(); ns];
    omega[T1] = F::lit(R_LISTEN);
    omega[T2] = F::lit(R_LISTEN);
    omega[TIGER] = F::lit(R_TIGER);
    omega[GOLD] = F::lit(R_GOLD);
    let coe_set = [T1, T2].iter().flat_map(|&s| (0..na).map(move |a| (s, a))).collect();
    Ok(Environment {
        kind: EnvKind::TigerTreasure,
        mdp,
        true_omega: omega,
        state_names: ["S0", "T1", "T2", "Tiger", "Gold", "S_T"].map(String::from).to_vec(),
        action_names: ["open1", "open2", "listen"].map(String::from).to_vec(),
        coe_set,
        horizon: spec.horizon,
        listen_action: Some(LISTEN),
        gold_states: vec![GOLD],
        tiger_states: vec![TIGER],
        maze: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmdp::{sample_rollout, StochasticPolicy, TabularPolicy};
    use crate::envs::{expert_policy, generate_expert_dataset};
    use crate::planning::{evaluate_markov_policy, prior_averaged_return};
    use crate::rng::RngStream;

    fn env(p: f64) -> Environment<f64> {
        build_tiger_treasure(&TigerTreasureSpec { listen_success: p, ..Default::default() }).unwrap()
    }

    #[test]
    fn kernel_matches_construction() {
        let e = env(0.85);
        let m = &e.mdp;
        assert_eq!(m.prob(S0, LISTEN, 0, T1), 0.85);
        assert!((m.prob(S0, LISTEN, 0, T2) - 0.15).abs() < 1e-15);
        for a in 0..3 {
            assert_eq!(m.prob(GOLD, a, 1, S_T), 1.0);
        }
        assert!(build_tiger_treasure::<f64>(&TigerTreasureSpec { listen_success: 0.5, ..Default::default() }).is_err());
    }

    #[test]
    fn open_door_one_in_context_one_meets_tiger() {
        let e = env(0.85);
        let mut pol = TabularPolicy { actions: vec![OPEN_1; 6] };
        let t = sample_rollout(&e.mdp, 0, &mut pol, 50, &mut RngStream::new(0)).unwrap();
        assert_eq!(t.steps(), &[(S0, OPEN_1), (TIGER, OPEN_1)]);
        assert_eq!(t.final_state(), S_T);
    }

    #[test]
    fn listen_frequencies_match_kernel() {
        let e = env(0.85);
        let mut rng = RngStream::new(99);
        let n = 100_000;
        let hits = (0..n).filter(|_| e.mdp.sample_next(S0, LISTEN, 0, &mut rng) == T1).count();
        let freq = hits as f64 / n as f64;
        let se = (0.85 * 0.15 / n as f64).sqrt();
        assert!((freq - 0.85).abs() < 3.0 * se, "freq {freq}");
    }

    #[test]
    fn naive_imitator_returns_minus_45_gamma() {
        let e = env(0.85);
        let mut pol = StochasticPolicy::<f64>::uniform(6, 3);
        pol.probs[S0] = vec![0.5, 0.5, 0.0];
        let v = prior_averaged_return(&e.mdp, &pol, &e.true_reward()).unwrap();
        assert!((v - (-45.0 * 0.99)).abs() < 1e-8, "{v}");
    }

    #[test]
    fn listen_then_act_at_p1_returns_discounted_hint_cost_plus_gold() {
        // Under the state-reward convention shared with the naive imitator the
        // hint cost is paid at t = 1 and the gold at t = 2.
        let e = env(1.0);
        let g = 0.99;
        let mut acts = vec![OPEN_1; 6];
        acts[S0] = LISTEN;
        acts[T1] = OPEN_2;
        acts[T2] = OPEN_1;
        let pol = StochasticPolicy::from_deterministic(&TabularPolicy { actions: acts }, 3);
        let r = e.true_reward();
        for theta in 0..2 {
            let v = evaluate_markov_policy(&e.mdp, theta, &pol, &r).unwrap();
            assert!((v[S0] - (10.0 * g * g - g)).abs() < 1e-8);
        }
    }

    #[test]
    fn expert_opens_gold_door_and_never_listens() {
        let e = env(0.85);
        let p0 = expert_policy(&e, 0).unwrap();
        let p1 = expert_policy(&e, 1).unwrap();
        assert_eq!(p0.actions[S0], OPEN_2);
        assert_eq!(p1.actions[S0], OPEN_1);
        assert!(p0.actions.iter().chain(&p1.actions).all(|&a| a != LISTEN));
        let data = generate_expert_dataset(&e, 1000, 50, &mut RngStream::new(5)).unwrap();
        let mut door1 = 0;
        for t in &data.trajectories {
            assert!(t.visits(GOLD) && !t.visits(TIGER));
            if t.steps()[0].1 == OPEN_1 {
                door1 += 1;
            }
        }
        let f = door1 as f64 / 1000.0;
        assert!((f - 0.5).abs() < 3.0 * (0.25f64 / 1000.0).sqrt());
    }
}
