//! Transient master-equation solutions on a finite box by uniformization.
//!
//! The generator is restricted to a box of states; any jump that would leave
//! the box is redirected into an absorbing sink. With `L >= max a_0` over the
//! box, `P = I + Q/L` is stochastic and
//!
//! ```text
//! exp(Q t) p0 = sum_n Poisson(n; L t) P^n p0.
//! ```
//!
//! The series is cut once the Poisson tail is provably below its share of the
//! tolerance. Sink mass and the dropped tail together form the reported
//! truncation loss.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::NormSpec;
use crate::model::ReactionNetwork;
use crate::pmf::{LatticeState, SparsePmf};

/// Largest number of box states the solver will allocate.
pub const MAX_BOX_STATES: usize = 50_000_000;

/// Uniformization works on sub-intervals with `L * dt` at most this, which
/// keeps `exp(-L dt)` far from underflow.
const MAX_RATE_TIME_PER_PIECE: f64 = 32.0;

const MAX_SERIES_TERMS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CmeError {
    #[error("invalid truncation box: {0}")]
    InvalidBox(String),
    #[error("box has more than {MAX_BOX_STATES} states")]
    BoxTooLarge,
    #[error("initial distribution has mass at {0}, outside the truncation box")]
    InitialOutsideBox(LatticeState),
    #[error("initial distribution must be a non-negative measure")]
    SignedInitial,
    #[error("truncation loss {loss:e} exceeds tolerance {tolerance:e}; enlarge the box")]
    BoxTooSmall { loss: f64, tolerance: f64 },
    #[error("uniformization rate {0} is not finite")]
    RateOverflow(f64),
    #[error("invalid time {0}")]
    InvalidTime(f64),
    #[error("uniformization series did not converge within {MAX_SERIES_TERMS} terms")]
    SeriesDiverged,
}

/// Finite box `lower <= x <= upper` and the admissible truncation loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationSpec {
    pub lower: Vec<i64>,
    pub upper: Vec<i64>,
    pub mass_tolerance: f64,
}

impl TruncationSpec {
    pub fn new(lower: Vec<i64>, upper: Vec<i64>, mass_tolerance: f64) -> Self {
        Self {
            lower,
            upper,
            mass_tolerance,
        }
    }

    pub fn validate(&self) -> Result<(), CmeError> {
        if self.lower.len() != self.upper.len() {
            return Err(CmeError::InvalidBox("bound lengths differ".into()));
        }
        if let Some(i) = (0..self.lower.len()).find(|&i| self.lower[i] > self.upper[i]) {
            return Err(CmeError::InvalidBox(format!(
                "lower bound {} exceeds upper bound {} for species {}",
                self.lower[i], self.upper[i], i
            )));
        }
        if !(self.mass_tolerance > 0.0 && self.mass_tolerance < 1.0) {
            return Err(CmeError::InvalidBox(format!(
                "mass tolerance {} not in (0, 1)",
                self.mass_tolerance
            )));
        }
        Ok(())
    }

    pub fn contains(&self, x: &LatticeState) -> bool {
        x.dim() == self.lower.len()
            && x
                .coords()
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&c, (&lo, &hi))| lo <= c && c <= hi)
    }

    /// Number of lattice points in the box.
    pub fn n_states(&self) -> Option<usize> {
        self.lower
            .iter()
            .zip(&self.upper)
            .try_fold(1usize, |acc, (&lo, &hi)| {
                let width = usize::try_from(hi.checked_sub(lo)?.checked_add(1)?).ok()?;
                acc.checked_mul(width)
            })
    }
}

/// Oracle output with its error budget.
#[derive(Debug, Clone, PartialEq)]
pub struct CmeSolution {
    pub pmf: SparsePmf,
    /// `exit_loss + series_loss`; `sum(pmf)` lies in `[1 - truncation_loss, 1]`.
    pub truncation_loss: f64,
    /// Mass that left the box.
    pub exit_loss: f64,
    /// Bound on the dropped Poisson tail of the series.
    pub series_loss: f64,
    pub uniformization_rate: f64,
    pub series_terms: usize,
}

/// The box-restricted generator in compressed form, reusable across solves.
#[derive(Debug, Clone)]
pub struct TruncatedGenerator {
    spec: TruncationSpec,
    widths: Vec<usize>,
    exit_rates: Vec<f64>,
    offsets: Vec<usize>,
    /// Target index per transition; `usize::MAX` is the sink.
    targets: Vec<usize>,
    rates: Vec<f64>,
    uniformization_rate: f64,
}

const SINK: usize = usize::MAX;

impl TruncatedGenerator {
    pub fn new(net: &ReactionNetwork, spec: &TruncationSpec) -> Result<Self, CmeError> {
        spec.validate()?;
        if spec.lower.len() != net.n_species() {
            return Err(CmeError::InvalidBox(format!(
                "box has dimension {}, network has {} species",
                spec.lower.len(),
                net.n_species()
            )));
        }
        let n_states = spec.n_states().ok_or(CmeError::BoxTooLarge)?;
        if n_states > MAX_BOX_STATES {
            return Err(CmeError::BoxTooLarge);
        }
        let widths: Vec<usize> = spec
            .lower
            .iter()
            .zip(&spec.upper)
            .map(|(&lo, &hi)| (hi - lo + 1) as usize)
            .collect();
        let mut gen = Self {
            spec: spec.clone(),
            widths,
            exit_rates: Vec::with_capacity(n_states),
            offsets: Vec::with_capacity(n_states + 1),
            targets: Vec::new(),
            rates: Vec::new(),
            uniformization_rate: 0.0,
        };
        gen.offsets.push(0);
        let mut x = LatticeState::new(spec.lower.clone());
        for _ in 0..n_states {
            let mut a0 = 0.0;
            for j in 0..net.n_reactions() {
                let a = net.propensity(j, &x);
                if a > 0.0 {
                    a0 += a;
                    let y = x.shifted(net.nu(j), 1);
                    gen.targets.push(gen.index_of(&y).unwrap_or(SINK));
                    gen.rates.push(a);
                }
            }
            if !a0.is_finite() {
                return Err(CmeError::RateOverflow(a0));
            }
            gen.uniformization_rate = gen.uniformization_rate.max(a0);
            gen.exit_rates.push(a0);
            gen.offsets.push(gen.targets.len());
            gen.advance(&mut x);
        }
        Ok(gen)
    }

    pub fn spec(&self) -> &TruncationSpec {
        &self.spec
    }

    pub fn n_states(&self) -> usize {
        self.exit_rates.len()
    }

    pub fn uniformization_rate(&self) -> f64 {
        self.uniformization_rate
    }

    /// Mixed-radix index with the last species varying fastest.
    pub fn index_of(&self, x: &LatticeState) -> Option<usize> {
        if !self.spec.contains(x) {
            return None;
        }
        let mut idx = 0usize;
        for (i, &c) in x.coords().iter().enumerate() {
            idx = idx * self.widths[i] + (c - self.spec.lower[i]) as usize;
        }
        Some(idx)
    }

    pub fn state_of(&self, mut idx: usize) -> LatticeState {
        let mut coords = vec![0i64; self.widths.len()];
        for i in (0..self.widths.len()).rev() {
            coords[i] = self.spec.lower[i] + (idx % self.widths[i]) as i64;
            idx /= self.widths[i];
        }
        LatticeState::new(coords)
    }

    fn advance(&self, x: &mut LatticeState) {
        let mut coords = x.coords().to_vec();
        for i in (0..coords.len()).rev() {
            if coords[i] < self.spec.upper[i] {
                coords[i] += 1;
                break;
            }
            coords[i] = self.spec.lower[i];
        }
        *x = LatticeState::new(coords);
    }

    /// `out = P v` with `P = I + Q / rate`; `v` and `out` carry the sink last.
    fn apply_uniformized(&self, v: &[f64], out: &mut [f64], rate: f64) {
        let n = self.n_states();
        out.iter_mut().for_each(|o| *o = 0.0);
        out[n] = v[n];
        for i in 0..n {
            let w = v[i];
            if w == 0.0 {
                continue;
            }
            out[i] += w * (1.0 - self.exit_rates[i] / rate);
            for t in self.offsets[i]..self.offsets[i + 1] {
                let flow = w * self.rates[t] / rate;
                match self.targets[t] {
                    SINK => out[n] += flow,
                    target => out[target] += flow,
                }
            }
        }
    }

    /// `exp(Q_box t) p0` with the loss accounting described in the module docs.
    pub fn solve(&self, p0: &SparsePmf, t: f64) -> Result<CmeSolution, CmeError> {
        if !t.is_finite() || t < 0.0 {
            return Err(CmeError::InvalidTime(t));
        }
        if p0.is_signed() || p0.iter().any(|(_, w)| w < 0.0) {
            return Err(CmeError::SignedInitial);
        }
        let n = self.n_states();
        let mut v = vec![0.0; n + 1];
        for (x, w) in p0.iter() {
            let idx = self
                .index_of(x)
                .ok_or_else(|| CmeError::InitialOutsideBox(x.clone()))?;
            v[idx] += w;
        }
        let rate = self.uniformization_rate;
        let mut series_loss = 0.0;
        let mut series_terms = 0;
        if t > 0.0 && rate > 0.0 {
            let pieces = ((rate * t) / MAX_RATE_TIME_PER_PIECE).ceil().max(1.0) as usize;
            let lt = rate * t / pieces as f64;
            let eps = 0.5 * self.spec.mass_tolerance / pieces as f64;
            let mut term = vec![0.0; n + 1];
            let mut next = vec![0.0; n + 1];
            for _ in 0..pieces {
                let mass: f64 = v.iter().sum();
                let mut weight = (-lt).exp();
                let mut acc: Vec<f64> = v.iter().map(|&w| w * weight).collect();
                term.copy_from_slice(&v);
                let mut k = 0usize;
                loop {
                    // Tail bound: sum_{m > k} w_m <= w_{k+1} / (1 - lt / (k + 2)) once k + 2 > lt.
                    let next_weight = weight * lt / (k + 1) as f64;
                    if (k + 2) as f64 > lt {
                        let tail = next_weight / (1.0 - lt / (k + 2) as f64);
                        if tail <= eps {
                            series_loss += tail * mass;
                            break;
                        }
                    }
                    k += 1;
                    if k > MAX_SERIES_TERMS {
                        return Err(CmeError::SeriesDiverged);
                    }
                    weight = next_weight;
                    self.apply_uniformized(&term, &mut next, rate);
                    std::mem::swap(&mut term, &mut next);
                    for (a, &b) in acc.iter_mut().zip(&term) {
                        *a += weight * b;
                    }
                }
                series_terms += k;
                v = acc;
            }
        }
        let exit_loss = v[n];
        let truncation_loss = exit_loss + series_loss;
        if truncation_loss > self.spec.mass_tolerance {
            return Err(CmeError::BoxTooSmall {
                loss: truncation_loss,
                tolerance: self.spec.mass_tolerance,
            });
        }
        let mut pmf = SparsePmf::zero(false);
        for (i, &w) in v[..n].iter().enumerate() {
            if w != 0.0 {
                pmf.add(self.state_of(i), w);
            }
        }
        Ok(CmeSolution {
            pmf,
            truncation_loss,
            exit_loss,
            series_loss,
            uniformization_rate: rate,
            series_terms,
        })
    }
}

/// `exp(Q t) p0` on the truncation box.
pub fn cme_solve(
    net: &ReactionNetwork,
    p0: &SparsePmf,
    t: f64,
    trunc: &TruncationSpec,
) -> Result<CmeSolution, CmeError> {
    TruncatedGenerator::new(net, trunc)?.solve(p0, t)
}

/// `sum_x (1 + |x|^r) p(x)`.
pub fn cme_moment(pmf: &SparsePmf, r: u32, norm: &NormSpec) -> f64 {
    pmf.expect(|x| 1.0 + norm.eval(x).powi(r as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::tv_distance;
    use crate::model::library;

    fn poisson_pmf(lambda: f64, k: u64) -> f64 {
        // Independent of the solver: direct product form.
        let mut p = (-lambda).exp();
        for i in 1..=k {
            p *= lambda / i as f64;
        }
        p
    }

    #[test]
    fn zero_time_is_identity() {
        let net = library::binding_birth_death([0.1, 0.5, 0.3, 0.4]);
        let p0 = SparsePmf::delta(LatticeState::from([5, 5, 5]));
        let trunc = TruncationSpec::new(vec![0; 3], vec![10, 40, 10], 1e-9);
        let sol = cme_solve(&net, &p0, 0.0, &trunc).unwrap();
        assert_eq!(sol.pmf, p0);
        assert_eq!(sol.truncation_loss, 0.0);
    }

    #[test]
    fn decay_two_state_closed_form() {
        let net = library::decay(1.0);
        let trunc = TruncationSpec::new(vec![0], vec![1], 1e-12);
        let p0 = SparsePmf::delta(LatticeState::from([1]));
        for t in [0.1, 1.0, 3.7, 60.0] {
            let sol = cme_solve(&net, &p0, t, &trunc).unwrap();
            assert!((sol.pmf.get(&LatticeState::from([1])) - (-t).exp()).abs() < 1e-10);
            assert!((sol.pmf.get(&LatticeState::from([0])) - (1.0 - (-t).exp())).abs() < 1e-10);
        }
    }

    #[test]
    fn pure_birth_matches_poisson() {
        let net = library::pure_birth(1.0);
        let trunc = TruncationSpec::new(vec![0], vec![30], 1e-9);
        let sol = cme_solve(&net, &SparsePmf::delta(LatticeState::from([0])), 1.0, &trunc).unwrap();
        let exact = SparsePmf::from_entries(
            (0..=30).map(|k| (LatticeState::from([k as i64]), poisson_pmf(1.0, k))),
            false,
        );
        assert!(tv_distance(&sol.pmf, &exact) < 1e-8);
        assert!(sol.pmf.is_probability(sol.truncation_loss));
    }

    #[test]
    fn moments_of_simple_measures() {
        let one = NormSpec::OneNorm;
        assert_eq!(cme_moment(&SparsePmf::delta(LatticeState::zeros(3)), 4, &one), 1.0);
        assert_eq!(cme_moment(&SparsePmf::delta(LatticeState::from([1, -1])), 3, &one), 9.0);
        let pois = SparsePmf::from_entries(
            (0..=30).map(|k| (LatticeState::from([k as i64]), poisson_pmf(1.0, k))),
            false,
        );
        assert!((cme_moment(&pois, 1, &one) - 2.0).abs() < 1e-8);
    }

    #[test]
    fn small_box_is_reported() {
        let net = library::pure_birth(5.0);
        let trunc = TruncationSpec::new(vec![0], vec![3], 1e-6);
        let err = cme_solve(&net, &SparsePmf::delta(LatticeState::from([0])), 1.0, &trunc)
            .unwrap_err();
        assert!(matches!(err, CmeError::BoxTooSmall { .. }));
    }

    #[test]
    fn initial_mass_outside_box() {
        let net = library::decay(1.0);
        let trunc = TruncationSpec::new(vec![0], vec![3], 1e-6);
        let err = cme_solve(&net, &SparsePmf::delta(LatticeState::from([4])), 1.0, &trunc)
            .unwrap_err();
        assert_eq!(err, CmeError::InitialOutsideBox(LatticeState::from([4])));
    }

    #[test]
    fn box_indexing_round_trips() {
        let net = library::binding_birth_death([1.0; 4]);
        let trunc = TruncationSpec::new(vec![0, -1, 2], vec![2, 3, 4], 1e-3);
        let gen = TruncatedGenerator::new(&net, &trunc).unwrap();
        assert_eq!(gen.n_states(), 3 * 5 * 3);
        for i in 0..gen.n_states() {
            assert_eq!(gen.index_of(&gen.state_of(i)), Some(i));
        }
    }

    #[test]
    fn rejects_invalid_boxes() {
        let net = library::decay(1.0);
        for trunc in [
            TruncationSpec::new(vec![2], vec![1], 1e-3),
            TruncationSpec::new(vec![0], vec![1], 0.0),
            TruncationSpec::new(vec![0, 0], vec![1, 1], 1e-3),
        ] {
            assert!(matches!(
                TruncatedGenerator::new(&net, &trunc),
                Err(CmeError::InvalidBox(_))
            ));
        }
    }
}
