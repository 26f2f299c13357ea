//! Small analytic CMDPs used by tests: the four-state choice counterexample
//! where prior averaging misorders rewards, and the three-state two-context
//! MDP used to study temperature.

use super::{check_gamma, one_hot_rows, EnvError, EnvKind, Environment};
use crate::cmdp::CmdpBuilder;
use crate::scalar::Scalar;

/// Four states, actions left (0) and right (1), terminal `s3`.
///
/// - context 0: `s0 -L-> s1 -> s3`, `s0 -R-> s2 -> s3`
/// - context 1: `s0 -L-> s1 -> s0`, `s0 -R-> s2 -> s3`
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceCounterexampleSpec {
    /// Prior probability of context 0.
    pub eta: f64,
    pub gamma: f64,
    pub omega: [f64; 4],
}

impl Default for ChoiceCounterexampleSpec {
    fn default() -> Self {
        Self { eta: 0.4, gamma: 0.9, omega: [0.0, 1.0, 0.5, 2.0] }
    }
}

pub fn build_choice_counterexample<F: Scalar>(spec: &ChoiceCounterexampleSpec) -> Result<Environment<F>, EnvError> {
    if !(spec.eta > 0.0 && spec.eta < 1.0) {
        return Err(EnvError::InvalidSpec(format!("eta must be in (0, 1), got {}", spec.eta)));
    }
    check_gamma(spec.gamma)?;
    let (ns, na) = (4, 2);
    let mut b = CmdpBuilder::<F>::new(ns, na, 2);
    b.set_all_contexts(0, 0, 1).set_all_contexts(0, 1, 2);
    for a in 0..na {
        b.set(1, a, 0, 3, F::one()).set(1, a, 1, 0, F::one());
        b.set_all_contexts(2, a, 3).set_all_contexts(3, a, 3);
    }
    b.terminal(3)
        .initial_state(0)
        .context_prior(vec![F::lit(spec.eta), F::lit(1.0 - spec.eta)])
        .gamma(F::lit(spec.gamma))
        .features(ns, one_hot_rows(ns, na));
    Ok(Environment {
        kind: EnvKind::Custom,
        mdp: b.build()?,
        true_omega: spec.omega.iter().map(|&w| F::lit(w)).collect(),
        state_names: (0..ns).map(|i| format!("s{i}")).collect(),
        action_names: vec!["left".into(), "right".into()],
        coe_set: Vec::new(),
        horizon: 20,
        listen_action: None,
        gold_states: Vec::new(),
        tiger_states: Vec::new(),
        maze: None,
    })
}

/// Three states; in context 0 action 0 reaches `s1` and action 1 reaches `s2`,
/// context 1 swaps them. `s1` and `s2` are absorbing. True weights `(0, 1, -1)`,
/// uniform context prior.
pub fn build_three_state<F: Scalar>(gamma: f64) -> Result<Environment<F>, EnvError> {
    check_gamma(gamma)?;
    let (ns, na) = (3, 2);
    let mut b = CmdpBuilder::<F>::new(ns, na, 2);
    b.set(0, 0, 0, 1, F::one()).set(0, 1, 0, 2, F::one());
    b.set(0, 0, 1, 2, F::one()).set(0, 1, 1, 1, F::one());
    for a in 0..na {
        b.set_all_contexts(1, a, 1).set_all_contexts(2, a, 2);
    }
    b.terminal(1).terminal(2).initial_state(0).gamma(F::lit(gamma)).features(ns, one_hot_rows(ns, na));
    Ok(Environment {
        kind: EnvKind::Custom,
        mdp: b.build()?,
        true_omega: vec![F::zero(), F::one(), -F::one()],
        state_names: vec!["s0".into(), "s1".into(), "s2".into()],
        action_names: vec!["a1".into(), "a2".into()],
        coe_set: Vec::new(),
        horizon: 10,
        listen_action: None,
        gold_states: Vec::new(),
        tiger_states: Vec::new(),
        maze: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::expert_policy;

    #[test]
    fn counterexample_expert_goes_left_then_right() {
        let e: Environment<f64> = build_choice_counterexample(&ChoiceCounterexampleSpec::default()).unwrap();
        assert_eq!(expert_policy(&e, 0).unwrap().actions[0], 0);
        assert_eq!(expert_policy(&e, 1).unwrap().actions[0], 1);
    }

    #[test]
    fn three_state_expert_reaches_s1() {
        let e: Environment<f64> = build_three_state(0.9).unwrap();
        assert_eq!(expert_policy(&e, 0).unwrap().actions[0], 0);
        assert_eq!(expert_policy(&e, 1).unwrap().actions[0], 1);
    }
}
