//! Turning the IRL predictive reward into the planning reward: affine
//! rescaling into `[r_min, r_max]`, cost-of-exploration overrides on cells the
//! expert never needed to visit, and normalization before policy training.

use std::fmt;
use std::str::FromStr;

use log::warn;
use thiserror::Error;

use crate::cmdp::RewardTable;
use crate::io::FinalRewardRow;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewardError {
    #[error("reward table is constant; cannot rescale")]
    DegenerateRange,
    #[error("reward table is all zero")]
    AllZero,
    #[error("exploration cell ({s}, {a}) is outside the {num_states}x{num_actions} table")]
    CoeCellOutOfRange { s: usize, a: usize, num_states: usize, num_actions: usize },
    #[error("invalid exploration prior: {0}")]
    InvalidSpec(String),
    #[error("unknown provenance tag {0:?}")]
    UnknownProvenance(String),
}

/// Prior over the relative scale `k` of an exploration cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KPrior {
    Uniform { lo: f64, hi: f64 },
    Point(f64),
}

impl KPrior {
    pub fn mean(&self) -> f64 {
        match *self {
            KPrior::Uniform { lo, hi } => 0.5 * (lo + hi),
            KPrior::Point(k) => k,
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            KPrior::Uniform { lo, hi } => (lo, hi),
            KPrior::Point(k) => (k, k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeCell {
    pub s: usize,
    pub a: usize,
    pub k: KPrior,
}

/// Exploration cells and the reward range they are expressed in.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeSpec {
    pub cells: Vec<CoeCell>,
    pub r_min: f64,
    pub r_max: f64,
    /// Reward-model variance; only widens the predictive, never its mean.
    pub sigma_sq: f64,
}

impl CoeSpec {
    /// Every cell shares one prior over `k`.
    pub fn shared(cells: &[(usize, usize)], k: KPrior, r_min: f64, r_max: f64) -> Result<Self, RewardError> {
        let spec = Self {
            cells: cells.iter().map(|&(s, a)| CoeCell { s, a, k }).collect(),
            r_min,
            r_max,
            sigma_sq: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// No exploration cells: the IRL-only reward.
    pub fn disabled(r_min: f64, r_max: f64) -> Self {
        Self { cells: Vec::new(), r_min, r_max, sigma_sq: 1.0 }
    }

    /// `k` must lie in `[r_min / r_max, 1]`; `k = 1` is kept reachable so the
    /// limiting sweep point can be run.
    pub fn validate(&self) -> Result<(), RewardError> {
        if !(self.r_min < self.r_max && self.r_max > 0.0) {
            return Err(RewardError::InvalidSpec(format!(
                "need r_min < r_max and r_max > 0, got [{}, {}]",
                self.r_min, self.r_max
            )));
        }
        let lo_bound = self.r_min / self.r_max;
        for c in &self.cells {
            let (lo, hi) = c.k.support();
            if !(lo <= hi && lo >= lo_bound - 1e-12 && hi <= 1.0) {
                return Err(RewardError::InvalidSpec(format!(
                    "k support [{lo}, {hi}] at ({}, {}) outside [{lo_bound}, 1]",
                    c.s, c.a
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Irl,
    Coe,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Irl => "IRL",
            Provenance::Coe => "COE",
        })
    }
}

impl FromStr for Provenance {
    type Err = RewardError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "IRL" => Ok(Provenance::Irl),
            "COE" => Ok(Provenance::Coe),
            other => Err(RewardError::UnknownProvenance(other.to_string())),
        }
    }
}

/// Planning reward with a per-cell origin tag.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveReward<F> {
    pub table: RewardTable<F>,
    pub provenance: Vec<Provenance>,
}

impl<F: Scalar> PredictiveReward<F> {
    pub fn to_rows(&self) -> Vec<FinalRewardRow> {
        let na = self.table.num_actions();
        (0..self.table.num_states())
            .flat_map(|s| (0..na).map(move |a| (s, a)))
            .map(|(s, a)| FinalRewardRow {
                s,
                a,
                value: self.table.get(s, a).as_f64(),
                provenance: self.provenance[s * na + a].to_string(),
            })
            .collect()
    }

    pub fn from_rows(num_states: usize, num_actions: usize, rows: &[FinalRewardRow]) -> Result<Self, RewardError> {
        let mut table = RewardTable::zeros(num_states, num_actions);
        let mut provenance = vec![Provenance::Irl; num_states * num_actions];
        for r in rows {
            if r.s >= num_states || r.a >= num_actions {
                return Err(RewardError::CoeCellOutOfRange { s: r.s, a: r.a, num_states, num_actions });
            }
            table.set(r.s, r.a, F::lit(r.value));
            provenance[r.s * num_actions + r.a] = r.provenance.parse()?;
        }
        Ok(Self { table, provenance })
    }
}

fn extrema<F: Scalar>(table: &RewardTable<F>) -> (F, F) {
    table
        .values()
        .iter()
        .fold((F::infinity(), F::neg_infinity()), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Positive affine map sending the table's minimum to `r_min` and maximum to `r_max`.
pub fn rescale<F: Scalar>(table: &RewardTable<F>, r_min: F, r_max: F) -> Result<RewardTable<F>, RewardError> {
    if !(r_min < r_max) {
        return Err(RewardError::InvalidSpec(format!("need r_min < r_max, got [{r_min}, {r_max}]")));
    }
    let (lo, hi) = extrema(table);
    if !(hi > lo) {
        return Err(RewardError::DegenerateRange);
    }
    let scale = (r_max - r_min) / (hi - lo);
    Ok(table.map(|x| {
        // pin the endpoints so rounding cannot leave the range
        if x == lo {
            r_min
        } else if x == hi {
            r_max
        } else {
            (r_min + (x - lo) * scale).max(r_min).min(r_max)
        }
    }))
}

/// [`rescale`], except a constant table maps to `r_min` everywhere with a warning.
pub fn rescale_or_floor<F: Scalar>(table: &RewardTable<F>, r_min: F, r_max: F) -> Result<RewardTable<F>, RewardError> {
    match rescale(table, r_min, r_max) {
        Err(RewardError::DegenerateRange) => {
            warn!("learned reward is constant; every cell set to r_min = {r_min}");
            Ok(table.map(|_| r_min))
        }
        other => other,
    }
}

/// Overwrites every exploration cell with `k* r_max`, where `k*` is its prior mean.
pub fn apply_coe<F: Scalar>(scaled: &RewardTable<F>, spec: &CoeSpec) -> Result<PredictiveReward<F>, RewardError> {
    spec.validate()?;
    let (ns, na) = (scaled.num_states(), scaled.num_actions());
    let mut table = scaled.clone();
    let mut provenance = vec![Provenance::Irl; ns * na];
    for c in &spec.cells {
        if c.s >= ns || c.a >= na {
            return Err(RewardError::CoeCellOutOfRange { s: c.s, a: c.a, num_states: ns, num_actions: na });
        }
        table.set(c.s, c.a, F::lit(c.k.mean() * spec.r_max));
        provenance[c.s * na + c.a] = Provenance::Coe;
    }
    Ok(PredictiveReward { table, provenance })
}

/// Divides by the largest magnitude so entries lie in `[-1, 1]`; with
/// `standardize` it subtracts the mean and divides by the standard deviation instead.
pub fn normalize_for_training<F: Scalar>(table: &RewardTable<F>, standardize: bool) -> Result<RewardTable<F>, RewardError> {
    let v = table.values();
    let max_abs = v.iter().fold(F::zero(), |m, x| m.max(x.abs()));
    if max_abs == F::zero() {
        return Err(RewardError::AllZero);
    }
    if !standardize {
        return Ok(table.map(|x| x / max_abs));
    }
    let n = F::from_usize_lossy(v.len());
    let mean = v.iter().copied().sum::<F>() / n;
    let var = v.iter().map(|x| (*x - mean) * (*x - mean)).sum::<F>() / n;
    if var == F::zero() {
        return Err(RewardError::DegenerateRange);
    }
    let sd = var.sqrt();
    Ok(table.map(|x| (x - mean) / sd))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(vals: &[f64]) -> RewardTable<f64> {
        RewardTable::new(vals.len(), 1, vals.to_vec()).unwrap()
    }

    #[test]
    fn rescale_interpolates_and_pins_endpoints() {
        let r = rescale(&table(&[0.0, 5.0, 10.0]), -100.0, 10.0).unwrap();
        assert_eq!(r.values(), &[-100.0, -45.0, 10.0]);
        let same = rescale(&table(&[-100.0, 3.0, 10.0]), -100.0, 10.0).unwrap();
        for (a, b) in same.values().iter().zip(&[-100.0, 3.0, 10.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(rescale(&table(&[2.0, 2.0]), 0.0, 1.0), Err(RewardError::DegenerateRange));
        assert_eq!(rescale_or_floor(&table(&[2.0, 2.0]), -1.0, 1.0).unwrap().values(), &[-1.0, -1.0]);
    }

    #[test]
    fn coe_overrides_only_its_cells() {
        // Tiger-Treasure shaped table: 6 states, 3 actions, hint states 1 and 2
        let base = RewardTable::new(6, 3, (0..18).map(|i| -100.0 + 6.0 * i as f64).collect()).unwrap();
        let cells: Vec<_> = [1, 2].iter().flat_map(|&s| (0..3).map(move |a| (s, a))).collect();
        let spec = CoeSpec::shared(&cells, KPrior::Point(0.5), -100.0, 10.0).unwrap();
        let out = apply_coe(&base, &spec).unwrap();
        for s in 0..6 {
            for a in 0..3 {
                let hint = s == 1 || s == 2;
                if hint {
                    assert_eq!(out.table.get(s, a), 5.0);
                    assert_eq!(out.provenance[s * 3 + a], Provenance::Coe);
                } else {
                    assert_eq!(out.table.get(s, a).to_bits(), base.get(s, a).to_bits());
                    assert_eq!(out.provenance[s * 3 + a], Provenance::Irl);
                }
            }
        }
        let none = apply_coe(&base, &CoeSpec::disabled(-100.0, 10.0)).unwrap();
        assert_eq!(none.table, base);
        let uni = CoeSpec::shared(&[(0, 0)], KPrior::Uniform { lo: -0.2, hi: 0.6 }, -1.0, 2.0).unwrap();
        assert!((apply_coe(&base, &uni).unwrap().table.get(0, 0) - 2.0 * 0.2).abs() < 1e-15);
    }

    #[test]
    fn coe_spec_checks() {
        assert!(CoeSpec::shared(&[(0, 0)], KPrior::Point(-11.0), -100.0, 10.0).is_err());
        assert!(CoeSpec::shared(&[(0, 0)], KPrior::Point(1.5), -100.0, 10.0).is_err());
        assert!(CoeSpec::shared(&[(0, 0)], KPrior::Point(0.0), 1.0, 1.0).is_err());
        let spec = CoeSpec::shared(&[(9, 0)], KPrior::Point(0.0), -1.0, 1.0).unwrap();
        assert!(matches!(apply_coe(&table(&[0.0, 1.0]), &spec), Err(RewardError::CoeCellOutOfRange { .. })));
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_for_training(&table(&[-100.0, 5.0, 10.0]), false).unwrap().values(), &[-1.0, 0.05, 0.1]);
        assert_eq!(normalize_for_training(&table(&[3.0, 3.0]), false).unwrap().values(), &[1.0, 1.0]);
        assert_eq!(normalize_for_training(&table(&[0.0, 0.0]), false), Err(RewardError::AllZero));
        let z = normalize_for_training(&table(&[1.0, 3.0]), true).unwrap();
        assert_eq!(z.values(), &[-1.0, 1.0]);
    }

    #[test]
    fn rows_round_trip() {
        let spec = CoeSpec::shared(&[(1, 0)], KPrior::Point(0.25), -1.0, 1.0).unwrap();
        let p = apply_coe(&table(&[0.0, 0.5, -1.0]), &spec).unwrap();
        let back = PredictiveReward::<f64>::from_rows(3, 1, &p.to_rows()).unwrap();
        assert_eq!(back, p);
    }
}
