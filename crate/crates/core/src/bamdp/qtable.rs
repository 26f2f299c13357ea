//! Belief-augmented tabular Q-learning.

use std::collections::HashMap;

use super::belief::BeliefState;
use super::BamdpError;
use crate::cmdp::{ContextualMdp, RewardTable};
use crate::io::QRow;
use crate::rng::RngStream;
use crate::scalar::{argmax_lowest, Scalar};

/// Discretized belief used as part of the augmented state.
pub type BeliefKey = Vec<i64>;

const NEG_INF_KEY: i64 = i64::MIN;

/// Odds below which a context counts as ruled out for keying purposes.
pub const DEFAULT_KEY_FLOOR: f64 = 1e-4;

/// Maps beliefs to discrete keys.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BeliefKeyer {
    /// Log-odds of each context against the most likely one, clamped below at
    /// `ln(floor)` and rounded to multiples of `quantum`; a context with zero
    /// mass gets a sentinel. Distinct keys are distinct beliefs; beliefs whose
    /// runners-up all sit below `floor` share a key per certainty pattern.
    /// `floor = 0` disables the clamp.
    Exact { quantum: f64, floor: f64 },
    /// `bins` half-open equal-width bins per context probability.
    Uniform { bins: usize },
}

impl Default for BeliefKeyer {
    fn default() -> Self {
        BeliefKeyer::Exact { quantum: 1e-6, floor: DEFAULT_KEY_FLOOR }
    }
}

impl BeliefKeyer {
    /// Exact keying without the certainty clamp; used by the planning oracles.
    pub fn lossless() -> Self {
        BeliefKeyer::Exact { quantum: 1e-9, floor: 0.0 }
    }

    pub fn key<F: Scalar>(&self, b: &BeliefState<F>) -> BeliefKey {
        match *self {
            BeliefKeyer::Exact { quantum, floor } => {
                let lw = b.log_weights();
                let top = lw.iter().fold(f64::NEG_INFINITY, |m, w| m.max(w.as_f64()));
                let lo = floor.ln();
                lw.iter()
                    .map(|w| {
                        let w = w.as_f64();
                        if w == f64::NEG_INFINITY {
                            NEG_INF_KEY
                        } else {
                            ((w - top).max(lo) / quantum).round() as i64
                        }
                    })
                    .collect()
            }
            BeliefKeyer::Uniform { bins } => {
                let probs = b.probs();
                // binary contexts: one bin index for the probability of context 1
                let tracked: &[F] = if probs.len() == 2 { &probs[1..] } else { &probs };
                tracked
                    .iter()
                    .map(|p| ((p.as_f64() * bins as f64).floor() as i64).clamp(0, bins as i64 - 1))
                    .collect()
            }
        }
    }

    /// Fails if two beliefs differing by more than `tol` in probability share a key.
    pub fn check_injective<F: Scalar>(&self, beliefs: &[BeliefState<F>], tol: f64) -> Result<(), BamdpError> {
        let mut seen: HashMap<BeliefKey, Vec<F>> = HashMap::new();
        for b in beliefs {
            let p = b.probs();
            match seen.get(&self.key(b)) {
                Some(q) => {
                    let gap = p.iter().zip(q).fold(0.0f64, |m, (x, y)| m.max((x.as_f64() - y.as_f64()).abs()));
                    if gap > tol {
                        return Err(BamdpError::KeyCollision {
                            first: q.iter().map(|x| x.as_f64()).collect(),
                            second: p.iter().map(|x| x.as_f64()).collect(),
                        });
                    }
                }
                None => {
                    seen.insert(self.key(b), p);
                }
            }
        }
        Ok(())
    }
}

/// Dense ids for `(state, belief key)` pairs, assigned on first sight.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AugmentedStates {
    ids: HashMap<(usize, BeliefKey), usize>,
    entries: Vec<(usize, BeliefKey)>,
}

impl AugmentedStates {
    pub fn get(&self, s: usize, key: &BeliefKey) -> Option<usize> {
        self.ids.get(&(s, key.clone())).copied()
    }

    pub fn intern(&mut self, s: usize, key: BeliefKey) -> usize {
        let next = self.entries.len();
        *self.ids.entry((s, key.clone())).or_insert_with(|| {
            self.entries.push((s, key));
            next
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, id: usize) -> &(usize, BeliefKey) {
        &self.entries[id]
    }
}

/// Linear epsilon schedule from `start` to `end` over `fraction` of training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub fraction: f64,
}

impl EpsilonSchedule {
    pub fn at(&self, step: usize, total: usize) -> f64 {
        let span = (self.fraction * total as f64).max(1.0);
        let frac = (step as f64 / span).min(1.0);
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QConfig {
    pub parallel_envs: usize,
    /// Episode length; hitting it truncates without ending the return.
    pub rollout_steps: usize,
    /// Each update advances every parallel environment by one step.
    pub updates: usize,
    pub learning_rate: f64,
    pub epsilon: EpsilonSchedule,
    /// Steps between target syncs; 1 bootstraps from the live table.
    pub target_period: usize,
    pub keyer: BeliefKeyer,
}

impl Default for QConfig {
    fn default() -> Self {
        Self {
            parallel_envs: 16,
            rollout_steps: 50,
            updates: 20_000,
            learning_rate: 0.1,
            epsilon: EpsilonSchedule { start: 1.0, end: 0.05, fraction: 0.5 },
            target_period: 1,
            keyer: BeliefKeyer::default(),
        }
    }
}

/// Q-values over belief-augmented states.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable<F> {
    pub keyer: BeliefKeyer,
    states: AugmentedStates,
    num_actions: usize,
    q: Vec<F>,
    target: Vec<F>,
    pub learning_rate: F,
    pub gamma: F,
    pub target_period: usize,
    since_sync: usize,
}

impl<F: Scalar> QTable<F> {
    pub fn new(num_actions: usize, keyer: BeliefKeyer, learning_rate: F, gamma: F, target_period: usize) -> Self {
        Self {
            keyer,
            states: AugmentedStates::default(),
            num_actions,
            q: Vec::new(),
            target: Vec::new(),
            learning_rate,
            gamma,
            target_period: target_period.max(1),
            since_sync: 0,
        }
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn augmented_states(&self) -> &AugmentedStates {
        &self.states
    }

    pub fn intern(&mut self, s: usize, belief: &BeliefState<F>) -> usize {
        let id = self.states.intern(s, self.keyer.key(belief));
        if self.q.len() < (id + 1) * self.num_actions {
            self.q.resize((id + 1) * self.num_actions, F::zero());
            self.target.resize((id + 1) * self.num_actions, F::zero());
        }
        id
    }

    pub fn lookup(&self, s: usize, belief: &BeliefState<F>) -> Option<usize> {
        self.states.get(s, &self.keyer.key(belief))
    }

    pub fn row(&self, id: usize) -> &[F] {
        &self.q[id * self.num_actions..(id + 1) * self.num_actions]
    }

    fn target_max(&self, id: usize) -> F {
        let src = if self.target_period == 1 { &self.q } else { &self.target };
        src[id * self.num_actions..(id + 1) * self.num_actions]
            .iter()
            .copied()
            .fold(F::neg_infinity(), F::max)
    }

    /// Greedy action, lowest index on ties; unseen augmented states pick action 0.
    pub fn greedy(&self, s: usize, belief: &BeliefState<F>) -> usize {
        self.lookup(s, belief).map_or(0, |id| argmax_lowest(self.row(id)))
    }

    pub fn value(&self, s: usize, belief: &BeliefState<F>) -> Option<F> {
        self.lookup(s, belief).map(|id| self.row(id).iter().copied().fold(F::neg_infinity(), F::max))
    }

    /// One Q-learning step; `next` is `None` when the episode ends in a terminal state.
    pub fn update(&mut self, id: usize, a: usize, reward: F, next: Option<usize>) -> Result<(), BamdpError> {
        let boot = next.map_or(F::zero(), |n| self.gamma * self.target_max(n));
        let i = id * self.num_actions + a;
        let cur = self.q[i];
        let new = cur + self.learning_rate * (reward + boot - cur);
        if !new.is_finite() {
            return Err(BamdpError::NonFiniteQ);
        }
        self.q[i] = new;
        Ok(())
    }

    pub fn tick(&mut self) {
        self.since_sync += 1;
        if self.target_period > 1 && self.since_sync >= self.target_period {
            self.target.copy_from_slice(&self.q);
            self.since_sync = 0;
        }
    }

    pub fn to_rows(&self) -> Vec<QRow> {
        let mut rows = Vec::with_capacity(self.q.len());
        for id in 0..self.states.len() {
            let (s, key) = self.states.entry(id);
            let belief = key.iter().map(|k| if *k == NEG_INF_KEY { "-inf".to_string() } else { k.to_string() }).collect::<Vec<_>>().join(";");
            for (a, q) in self.row(id).iter().enumerate() {
                rows.push(QRow { state: *s, belief: belief.clone(), action: a, q: q.as_f64() });
            }
        }
        rows
    }
}

/// Rebuilds a table from rows written by `QTable::to_rows`. The keyer must
/// be the one the table was trained with; rows may come in any order.
pub fn qtable_from_rows<F: Scalar>(
    rows: &[QRow],
    num_actions: usize,
    keyer: BeliefKeyer,
    gamma: F,
) -> Result<QTable<F>, BamdpError> {
    let mut table = QTable::new(num_actions, keyer, F::zero(), gamma, 1);
    for row in rows {
        if row.action >= num_actions {
            return Err(BamdpError::BadQRow(format!("action {} out of range", row.action)));
        }
        let key = row
            .belief
            .split(';')
            .map(|k| match k.trim() {
                "-inf" => Ok(NEG_INF_KEY),
                k => k.parse::<i64>().map_err(|_| BamdpError::BadQRow(format!("belief key `{}`", row.belief))),
            })
            .collect::<Result<BeliefKey, _>>()?;
        let id = table.states.intern(row.state, key);
        if table.q.len() < (id + 1) * num_actions {
            table.q.resize((id + 1) * num_actions, F::zero());
        }
        table.q[id * num_actions + row.action] = F::lit(row.q);
    }
    table.target = table.q.clone();
    Ok(table)
}

struct Worker<F> {
    theta: usize,
    s: usize,
    belief: BeliefState<F>,
    t: usize,
}

impl<F: Scalar> Worker<F> {
    fn reset(mdp: &ContextualMdp<F>, rng: &mut RngStream) -> Self {
        Self { theta: mdp.sample_context(rng), s: mdp.sample_initial(rng), belief: BeliefState::from_prior(mdp), t: 0 }
    }
}

/// Trains a belief-conditioned Q-table on `reward`. Each episode samples
/// `theta ~ p(theta)`, starts from the prior belief and ends on entering a
/// terminal state or after `rollout_steps` steps. `checkpoint(update, table)`
/// is called every `checkpoint_every` updates (0 disables it).
pub fn train_bayes_policy<F: Scalar>(
    mdp: &ContextualMdp<F>,
    reward: &RewardTable<F>,
    cfg: &QConfig,
    rng: &mut RngStream,
    checkpoint_every: usize,
    mut checkpoint: impl FnMut(usize, &QTable<F>),
) -> Result<QTable<F>, BamdpError> {
    if reward.num_states() != mdp.num_states() || reward.num_actions() != mdp.num_actions() {
        return Err(BamdpError::RewardShape);
    }
    let na = mdp.num_actions();
    let mut table = QTable::new(na, cfg.keyer, F::lit(cfg.learning_rate), mdp.gamma(), cfg.target_period);
    let mut workers: Vec<Worker<F>> = (0..cfg.parallel_envs.max(1)).map(|_| Worker::reset(mdp, rng)).collect();
    for step in 0..cfg.updates {
        let eps = cfg.epsilon.at(step, cfg.updates);
        for w in workers.iter_mut() {
            let id = table.intern(w.s, &w.belief);
            let a = if rng.uniform() < eps { rng.below(na) } else { argmax_lowest(table.row(id)) };
            let sn = mdp.sample_next(w.s, a, w.theta, rng);
            w.belief.update(mdp, w.s, a, sn)?;
            w.t += 1;
            let done = mdp.is_terminal(sn);
            let next = if done { None } else { Some(table.intern(sn, &w.belief)) };
            table.update(id, a, reward.get(w.s, a), next)?;
            w.s = sn;
            if done || w.t >= cfg.rollout_steps {
                *w = Worker::reset(mdp, rng);
            }
        }
        table.tick();
        if checkpoint_every > 0 && (step + 1) % checkpoint_every == 0 {
            checkpoint(step + 1, &table);
        }
    }
    Ok(table)
}
