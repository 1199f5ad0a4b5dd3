//! Checks of the structural and growth conditions behind tau-leap convergence.

mod alpha;
mod growth;
mod moments;
mod report;

use serde::Serialize;
use thiserror::Error;

use crate::exact::{CmeError, SsaError};
use crate::metrics::NormError;
use crate::model::ReactionNetwork;
use crate::pmf::LatticeState;
use crate::tauleap::KernelError;

pub use alpha::{find_alpha, AlphaCertificate, AlphaMethod, AlphaSearch, DEFAULT_ALPHA_BOUND};
pub use growth::{
    box_states, certify_uniform_growth, estimate_moment_growth, estimate_tauleap_moment_growth,
    step_moment_bound_check, GrowthEvidence, MomentEngine, MomentGrowthEstimate, StepMomentBound,
    StepMomentReport, UniformGrowthReport, MAX_MOMENT_ORDER,
};
pub use moments::{binomial_moment, poisson_moment};
pub use report::{verify_network, CheckOutcome, Verdict, VerificationReport, VerifyOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("moment order {0} is outside 1..={MAX_MOMENT_ORDER}")]
    InvalidOrder(u32),
    #[error("empty grid: {0}")]
    EmptyGrid(&'static str),
    #[error("grid values must be non-negative and finite: {0:?}")]
    InvalidGrid(Vec<f64>),
    #[error(
        "truncation loss {loss:e} times the largest box moment weight exceeds 1% of the moment {moment:e} at t = {t}"
    )]
    Contaminated { t: f64, loss: f64, moment: f64 },
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Oracle(#[from] CmeError),
    #[error(transparent)]
    Ssa(#[from] SsaError),
}

/// Polynomial degree of every propensity and the induced superlinear set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GrowthClassification {
    pub degrees: Vec<u32>,
    pub linearly_bounded: Vec<bool>,
    /// Indices of reactions with degree above 1, ascending.
    pub superlinear: Vec<usize>,
    pub s_star: u32,
}

impl GrowthClassification {
    /// Superlinear reactions first, then the linearly bounded ones.
    pub fn ordering(&self) -> Vec<usize> {
        let mut order = self.superlinear.clone();
        order.extend((0..self.degrees.len()).filter(|j| self.linearly_bounded[*j]));
        order
    }
}

pub fn classify_growth(net: &ReactionNetwork) -> GrowthClassification {
    let degrees: Vec<u32> = net.reactions().iter().map(|r| r.propensity.degree()).collect();
    let linearly_bounded: Vec<bool> = degrees.iter().map(|&d| d <= 1).collect();
    GrowthClassification {
        superlinear: (0..degrees.len()).filter(|&j| !linearly_bounded[j]).collect(),
        s_star: degrees.iter().copied().max().unwrap_or(0),
        degrees,
        linearly_bounded,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservativityViolation {
    pub reaction: usize,
    pub state: LatticeState,
    pub propensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservativityReport {
    pub checked_states: usize,
    pub n_violations: usize,
    /// The first violations found, in state order.
    pub violations: Vec<ConservativityViolation>,
    pub pass: bool,
}

const MAX_LISTED_VIOLATIONS: usize = 50;

/// Checks that `a_j(x) = 0` whenever `x + nu_j` leaves `Z_+^N`, for every `x`
/// in the box `lower..=upper` (clipped to `Z_+^N`).
pub fn check_conservative(net: &ReactionNetwork, lower: &[i64], upper: &[i64]) -> ConservativityReport {
    let n = net.n_species();
    let lo: Vec<i64> = (0..n).map(|i| lower.get(i).copied().unwrap_or(0).max(0)).collect();
    let hi: Vec<i64> = (0..n).map(|i| upper.get(i).copied().unwrap_or(-1)).collect();
    let mut report = ConservativityReport {
        checked_states: 0,
        n_violations: 0,
        violations: Vec::new(),
        pass: true,
    };
    if lo.iter().zip(&hi).any(|(l, h)| l > h) || lower.len() != n || upper.len() != n {
        return report;
    }
    // Only states within max|nu_ij| of a face can leave the orthant.
    let reach: Vec<i64> = (0..n)
        .map(|i| {
            (0..net.n_reactions())
                .map(|j| -net.nu(j)[i])
                .max()
                .unwrap_or(0)
                .max(0)
        })
        .collect();
    let mut x = lo.clone();
    loop {
        if x.iter().zip(&reach).any(|(&v, &r)| v < r) {
            let state = LatticeState::new(x.clone());
            report.checked_states += 1;
            for j in 0..net.n_reactions() {
                let exits = x.iter().zip(net.nu(j)).any(|(&v, &d)| v + d < 0);
                let a = net.propensity(j, &state);
                if exits && a > 0.0 {
                    report.n_violations += 1;
                    if report.violations.len() < MAX_LISTED_VIOLATIONS {
                        report.violations.push(ConservativityViolation {
                            reaction: j,
                            state: state.clone(),
                            propensity: a,
                        });
                    }
                }
            }
        }
        let mut i = n;
        loop {
            if i == 0 {
                report.pass = report.n_violations == 0;
                return report;
            }
            i -= 1;
            if x[i] < hi[i] {
                x[i] += 1;
                break;
            }
            x[i] = lo[i];
        }
    }
}
