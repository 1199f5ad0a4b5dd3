//! Norms on signed lattice measures, error functionals and convergence fitting.

mod consistency;
mod convergence;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pmf::{LatticeState, SparsePmf};

pub use consistency::{consistency_check, ConsistencyReport, ConsistencyResidual};
pub use convergence::{
    convergence_experiment, fit_order, ConvergenceError, ConvergenceOptions, ConvergenceReport,
    OrderFit,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NormError {
    #[error("weighted norm needs positive finite weights, got {0:?}")]
    InvalidWeights(Vec<f64>),
    #[error("weighted norm has {found} weights, state has {expected} coordinates")]
    WeightLength { expected: usize, found: usize },
    #[error("comparison needs 0 < r1 < r2, got r1 = {r1}, r2 = {r2}")]
    InvalidOrders { r1: u32, r2: u32 },
    #[error("comparison box is empty or larger than {0} states")]
    InvalidBox(usize),
}

/// A norm `|.|` on `R^N`, evaluated at lattice points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", content = "weights", rename_all = "snake_case")]
pub enum NormSpec {
    #[default]
    OneNorm,
    InfNorm,
    /// `sum_i w_i |x_i|`.
    WeightedOneNorm(Vec<f64>),
}

impl NormSpec {
    pub fn weighted(weights: Vec<f64>) -> Result<Self, NormError> {
        let spec = NormSpec::WeightedOneNorm(weights);
        spec.validate(None)?;
        Ok(spec)
    }

    /// Checks the weights, and their count against `dim` when given.
    pub fn validate(&self, dim: Option<usize>) -> Result<(), NormError> {
        if let NormSpec::WeightedOneNorm(w) = self {
            if w.is_empty() || w.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(NormError::InvalidWeights(w.clone()));
            }
            if let Some(d) = dim {
                if d != w.len() {
                    return Err(NormError::WeightLength {
                        expected: d,
                        found: w.len(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &LatticeState) -> f64 {
        let c = x.coords();
        match self {
            NormSpec::OneNorm => c.iter().map(|&v| v.unsigned_abs() as f64).sum(),
            NormSpec::InfNorm => c.iter().map(|&v| v.unsigned_abs()).max().unwrap_or(0) as f64,
            NormSpec::WeightedOneNorm(w) => {
                debug_assert_eq!(w.len(), c.len());
                c.iter().zip(w).map(|(&v, &a)| a * v.unsigned_abs() as f64).sum()
            }
        }
    }

    /// `1 + |x|^r`, with `|x|^0 = 1`.
    pub fn moment_weight(&self, x: &LatticeState, r: u32) -> f64 {
        1.0 + self.eval(x).powi(r as i32)
    }
}

/// `|g|_r = sum_x (1 + |x|^r) |g(x)| / 2`.
pub fn moment_variation(g: &SparsePmf, r: u32, norm: &NormSpec) -> f64 {
    g.iter()
        .map(|(x, w)| 0.5 * norm.moment_weight(x, r) * w.abs())
        .sum()
}

/// `sum_x |p1(x) - p2(x)|`.
pub fn tv_distance(p1: &SparsePmf, p2: &SparsePmf) -> f64 {
    p1.difference(p2).abs_mass()
}

/// `|sum_x |x|^r p1(x) - sum_x |x|^r p2(x)|`.
pub fn moment_error(p1: &SparsePmf, p2: &SparsePmf, r: u32, norm: &NormSpec) -> f64 {
    let m = |p: &SparsePmf| p.expect(|x| norm.eval(x).powi(r as i32));
    (m(p1) - m(p2)).abs()
}

/// Smallest `alpha` with `1 + |x|^r1 <= alpha (1 + |x|^r2)` on the box
/// `lower..=upper`, so that `|g|_r1 <= alpha |g|_r2` for every `g` supported there.
pub fn norm_comparison_constant(
    r1: u32,
    r2: u32,
    lower: &[i64],
    upper: &[i64],
    norm: &NormSpec,
) -> Result<f64, NormError> {
    const MAX_STATES: usize = 10_000_000;
    if !(0 < r1 && r1 < r2) {
        return Err(NormError::InvalidOrders { r1, r2 });
    }
    norm.validate(Some(lower.len()))?;
    if lower.len() != upper.len() || lower.iter().zip(upper).any(|(l, u)| l > u) {
        return Err(NormError::InvalidBox(MAX_STATES));
    }
    let size = lower
        .iter()
        .zip(upper)
        .try_fold(1usize, |acc, (l, u)| acc.checked_mul((u - l + 1) as usize))
        .filter(|&s| s <= MAX_STATES)
        .ok_or(NormError::InvalidBox(MAX_STATES))?;
    let mut alpha: f64 = 0.0;
    let mut x = lower.to_vec();
    for _ in 0..size {
        let s = LatticeState::new(x.clone());
        alpha = alpha.max(norm.moment_weight(&s, r1) / norm.moment_weight(&s, r2));
        for i in (0..x.len()).rev() {
            if x[i] < upper[i] {
                x[i] += 1;
                break;
            }
            x[i] = lower[i];
        }
    }
    Ok(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn st(c: &[i64]) -> LatticeState {
        LatticeState::new(c.to_vec())
    }

    #[test]
    fn norms() {
        let x = st(&[3, -4, 1]);
        assert_eq!(NormSpec::OneNorm.eval(&x), 8.0);
        assert_eq!(NormSpec::InfNorm.eval(&x), 4.0);
        assert_eq!(NormSpec::weighted(vec![1.0, 2.0, 0.5]).unwrap().eval(&x), 11.5);
        assert!(NormSpec::weighted(vec![1.0, 0.0]).is_err());
        assert!(NormSpec::WeightedOneNorm(vec![1.0]).validate(Some(2)).is_err());
    }

    #[test]
    fn moment_variation_examples() {
        let n = NormSpec::OneNorm;
        assert_eq!(moment_variation(&SparsePmf::delta(st(&[0, 0])), 5, &n), 0.5);
        assert_eq!(moment_variation(&SparsePmf::delta(st(&[1, 1])), 3, &n), 4.5);
        let p = SparsePmf::from_entries([(st(&[0]), 0.25), (st(&[7]), 0.75)], false);
        assert_eq!(moment_variation(&p, 0, &n), 1.0);
    }

    #[test]
    fn tv_examples() {
        let a = SparsePmf::delta(st(&[1]));
        let b = SparsePmf::delta(st(&[2]));
        assert_eq!(tv_distance(&a, &a), 0.0);
        assert_eq!(tv_distance(&a, &b), 2.0);
    }

    #[test]
    fn tv_between_poissons_matches_direct_sum() {
        let pois = |l: f64, k: i64| {
            let mut p = (-l).exp();
            for i in 1..=k {
                p *= l / i as f64;
            }
            p
        };
        let make = |l: f64| SparsePmf::from_entries((0..40).map(|k| (st(&[k]), pois(l, k))), false);
        let direct: f64 = (0..40).map(|k| (pois(1.0, k) - pois(1.1, k)).abs()).sum();
        assert!((tv_distance(&make(1.0), &make(1.1)) - direct).abs() < 1e-10);
    }

    #[test]
    fn moment_error_examples() {
        let n = NormSpec::OneNorm;
        let a = SparsePmf::delta(st(&[2]));
        let b = SparsePmf::delta(st(&[0]));
        assert_eq!(moment_error(&a, &a, 2, &n), 0.0);
        assert_eq!(moment_error(&a, &b, 2, &n), 4.0);
    }

    #[test]
    fn comparison_constant() {
        let n = NormSpec::OneNorm;
        assert_eq!(norm_comparison_constant(1, 2, &[-3, -3], &[3, 3], &n).unwrap(), 1.0);
        // A weight below 1 lets |x| fall in (0, 1), where |x|^1 > |x|^2.
        let w = NormSpec::weighted(vec![0.5]).unwrap();
        let a = norm_comparison_constant(1, 2, &[0], &[4], &w).unwrap();
        assert!((a - 1.5 / 1.25).abs() < 1e-15);
        assert!(norm_comparison_constant(2, 2, &[0], &[1], &n).is_err());
        assert!(norm_comparison_constant(1, 2, &[1], &[0], &n).is_err());
    }

    fn signed_measure() -> impl Strategy<Value = SparsePmf> {
        prop::collection::vec(((-6i64..6, -6i64..6), -2.0f64..2.0), 0..12).prop_map(|v| {
            SparsePmf::from_entries(v.into_iter().map(|((a, b), w)| (st(&[a, b]), w)), true)
        })
    }

    proptest! {
        #[test]
        fn moment_variation_is_a_norm(g in signed_measure(), h in signed_measure(), c in -3.0f64..3.0, r in 0u32..5) {
            let n = NormSpec::OneNorm;
            let mut sum = g.clone();
            sum.add_scaled(&h, 1.0);
            let lhs = moment_variation(&sum, r, &n);
            let rhs = moment_variation(&g, r, &n) + moment_variation(&h, r, &n);
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12);
            let scaled = moment_variation(&g.scaled(c), r, &n);
            prop_assert!((scaled - c.abs() * moment_variation(&g, r, &n)).abs() <= 1e-12 * (1.0 + scaled));
        }

        #[test]
        fn tv_is_zeroth_moment_variation(g in signed_measure(), h in signed_measure()) {
            let d = g.difference(&h);
            prop_assert_eq!(tv_distance(&g, &h), moment_variation(&d, 0, &NormSpec::OneNorm));
        }

        #[test]
        fn moment_error_is_bounded_by_twice_the_variation(g in signed_measure(), h in signed_measure(), r in 0u32..5) {
            let n = NormSpec::InfNorm;
            let bound = 2.0 * moment_variation(&g.difference(&h), r, &n);
            prop_assert!(moment_error(&g, &h, r, &n) <= bound * (1.0 + 1e-12));
        }

        #[test]
        fn comparison_holds(g in signed_measure()) {
            let n = NormSpec::OneNorm;
            let a = norm_comparison_constant(1, 2, &[-6, -6], &[5, 5], &n).unwrap();
            prop_assert!(moment_variation(&g, 1, &n) <= a * moment_variation(&g, 2, &n) * (1.0 + 1e-12));
        }
    }
}
