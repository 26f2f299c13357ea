//! Six-state latent chain. From `s0` the agent reaches the rewarding `s3`
//! either through `s1` (only open in context 1) or through the costly `s2`,
//! then loops back to `s0` through `s4` (context 0) or `s5` (context 1).
//!
//! Kernel (deterministic given the context):
//! - `s0, a0 -> s2`
//! - `s0, a1 -> s1` in context 1; in context 0 the `s1` gate is closed and
//!   `a1` is diverted to `s2`, so both actions coincide there
//! - `s1, * -> s3`, `s2, * -> s3`
//! - `s3, * -> s4` in context 0, `s5` in context 1
//! - `s4, * -> s0`, `s5, * -> s0`
//!
//! The context-0 expert is indifferent at `s0` and takes `a0` by the
//! lowest-index tie-break. Pooling both contexts then shows `a1` reaching
//! `s1` only rarely while the expert mostly picks `a0`, which a
//! context-blind reward can only explain by valuing `s2` above `s1`.

use super::{check_gamma, one_hot_rows, EnvError, EnvKind, Environment};
use crate::cmdp::CmdpBuilder;
use crate::scalar::Scalar;

pub const R_S3: f64 = 2.0;
pub const R_S2: f64 = -1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LatentChainSpec {
    /// Prior probability of context 0.
    pub p0: f64,
    pub gamma: f64,
    pub horizon: usize,
}

impl Default for LatentChainSpec {
    fn default() -> Self {
        Self { p0: 0.9, gamma: 0.99, horizon: 100 }
    }
}

pub fn build_latent_chain<F: Scalar>(spec: &LatentChainSpec) -> Result<Environment<F>, EnvError> {
    if !(spec.p0 > 0.0 && spec.p0 < 1.0) {
        return Err(EnvError::InvalidSpec(format!("p0 must be in (0, 1), got {}", spec.p0)));
    }
    check_gamma(spec.gamma)?;
    let (ns, na) = (6, 2);
    let mut b = CmdpBuilder::<F>::new(ns, na, 2);
    b.set_all_contexts(0, 0, 2);
    b.set(0, 1, 0, 2, F::one()).set(0, 1, 1, 1, F::one());
    for a in 0..na {
        b.set_all_contexts(1, a, 3).set_all_contexts(2, a, 3);
        b.set(3, a, 0, 4, F::one()).set(3, a, 1, 5, F::one());
        b.set_all_contexts(4, a, 0).set_all_contexts(5, a, 0);
    }
    b.initial_state(0)
        .context_prior(vec![F::lit(spec.p0), F::lit(1.0 - spec.p0)])
        .gamma(F::lit(spec.gamma))
        .features(ns, one_hot_rows(ns, na));
    let mdp = b.build()?;
    let mut omega = vec![F::zero(); ns];
    omega[2] = F::lit(R_S2);
    omega[3] = F::lit(R_S3);
    Ok(Environment {
        kind: EnvKind::LatentChain,
        mdp,
        true_omega: omega,
        state_names: (0..ns).map(|i| format!("s{i}")).collect(),
        action_names: vec!["a0".into(), "a1".into()],
        coe_set: Vec::new(),
        horizon: spec.horizon,
        listen_action: None,
        gold_states: Vec::new(),
        tiger_states: Vec::new(),
        maze: None,
    })
}
