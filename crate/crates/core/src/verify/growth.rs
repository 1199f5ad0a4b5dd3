//! Grid certificates for exponential moment growth and step-count moments.

use rayon::prelude::*;
use serde::Serialize;

use super::moments::{count_moments, sum_moments};
use super::{classify_growth, VerifyError};
use crate::exact::{cme_moment, cme_solve, ssa_ensemble, SsaOptions, TruncationSpec};
use crate::metrics::NormSpec;
use crate::model::ReactionNetwork;
use crate::pmf::{LatticeState, SparsePmf};
use crate::tauleap::{EnumerationOptions, TauLeapKernel};

/// Highest moment order the verifier evaluates.
pub const MAX_MOMENT_ORDER: u32 = 6;

/// How the exact moments `E(1 + |X(t)|^r)` are obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "engine", rename_all = "snake_case")]
pub enum MomentEngine {
    Cme { truncation: TruncationSpec },
    Ssa { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthEvidence {
    /// Elapsed time, or the step size for tau-leap estimates.
    pub t: f64,
    pub state: LatticeState,
    /// `E(1 + |X(t)|^r)` started from `state`.
    pub observed: f64,
    /// `(1 + |state|^r) exp(lambda_hat t)`.
    pub bound: f64,
    /// Probability not accounted for in `observed`.
    pub loss: f64,
}

/// Smallest `lambda_hat >= 0` that bounds every grid observation. This is a
/// certificate on the finite grid only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentGrowthEstimate {
    pub r: u32,
    pub method: String,
    pub lambda_hat: f64,
    pub evidence: Vec<GrowthEvidence>,
    pub certified: bool,
}

fn check_order(r: u32) -> Result<(), VerifyError> {
    if (1..=MAX_MOMENT_ORDER).contains(&r) {
        Ok(())
    } else {
        Err(VerifyError::InvalidOrder(r))
    }
}

fn check_grid(grid: &[f64], what: &'static str) -> Result<(), VerifyError> {
    if grid.is_empty() {
        return Err(VerifyError::EmptyGrid(what));
    }
    if grid.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
        return Err(VerifyError::InvalidGrid(grid.to_vec()));
    }
    Ok(())
}

/// Fills `lambda_hat` and the bounds from `(t, state, observed, loss)` rows.
fn certify(r: u32, method: &str, norm: &NormSpec, rows: Vec<(f64, LatticeState, f64, f64)>) -> MomentGrowthEstimate {
    let lambda_hat = rows
        .iter()
        .filter(|(t, ..)| *t > 0.0)
        .map(|(t, x, obs, _)| (obs / norm.moment_weight(x, r)).ln() / t)
        .fold(0.0, f64::max);
    let evidence: Vec<GrowthEvidence> = rows
        .into_iter()
        .map(|(t, state, observed, loss)| GrowthEvidence {
            bound: norm.moment_weight(&state, r) * (lambda_hat * t).exp(),
            t,
            state,
            observed,
            loss,
        })
        .collect();
    let certified = lambda_hat.is_finite()
        && evidence
            .iter()
            .all(|e| e.observed <= e.bound * (1.0 + 1e-12));
    MomentGrowthEstimate {
        r,
        method: method.to_owned(),
        lambda_hat,
        evidence,
        certified,
    }
}

/// Certifies `E(1 + |X(t)|^r) <= (1 + |x0|^r) exp(lambda t)` on `t_grid`.
pub fn estimate_moment_growth(
    engine: &MomentEngine,
    net: &ReactionNetwork,
    x0: &LatticeState,
    r: u32,
    norm: &NormSpec,
    t_grid: &[f64],
) -> Result<MomentGrowthEstimate, VerifyError> {
    check_order(r)?;
    check_grid(t_grid, "time grid")?;
    norm.validate(Some(net.n_species()))?;
    let rows: Vec<(f64, LatticeState, f64, f64)> = match engine {
        MomentEngine::Cme { truncation } => {
            let corner = LatticeState::new(
                truncation
                    .lower
                    .iter()
                    .zip(&truncation.upper)
                    .map(|(&l, &u)| l.abs().max(u.abs()))
                    .collect(),
            );
            let top = norm.moment_weight(&corner, r);
            let p0 = SparsePmf::delta(x0.clone());
            t_grid
                .par_iter()
                .map(|&t| {
                    let sol = cme_solve(net, &p0, t, truncation)?;
                    let moment = cme_moment(&sol.pmf, r, norm);
                    if sol.truncation_loss * top > 0.01 * moment {
                        return Err(VerifyError::Contaminated {
                            t,
                            loss: sol.truncation_loss,
                            moment,
                        });
                    }
                    Ok((t, x0.clone(), moment, sol.truncation_loss))
                })
                .collect::<Result<_, _>>()?
        }
        MomentEngine::Ssa { samples, seed } => {
            if *samples == 0 {
                return Err(VerifyError::EmptyGrid("SSA sample set"));
            }
            let mut rows = Vec::with_capacity(t_grid.len());
            for (i, &t) in t_grid.iter().enumerate() {
                let ends = ssa_ensemble(net, x0, t, *samples, seed.wrapping_add(i as u64), SsaOptions::default())?;
                let moment = ends.iter().map(|x| norm.moment_weight(x, r)).sum::<f64>() / *samples as f64;
                rows.push((t, x0.clone(), moment, 0.0));
            }
            rows
        }
    };
    let method = match engine {
        MomentEngine::Cme { .. } => "cme",
        MomentEngine::Ssa { .. } => "ssa",
    };
    Ok(certify(r, method, norm, rows))
}

/// Certifies `sum_x' (1 + |x'|^r) phi(tau, x, x') <= (1 + |x|^r) exp(lambda tau)`
/// for every `x` in `states` and `tau` in `tau_grid`.
pub fn estimate_tauleap_moment_growth(
    kernel: &TauLeapKernel,
    net: &ReactionNetwork,
    states: &[LatticeState],
    r: u32,
    norm: &NormSpec,
    tau_grid: &[f64],
    opts: &EnumerationOptions,
) -> Result<MomentGrowthEstimate, VerifyError> {
    check_order(r)?;
    check_grid(tau_grid, "step grid")?;
    if states.is_empty() {
        return Err(VerifyError::EmptyGrid("state set"));
    }
    norm.validate(Some(net.n_species()))?;
    let cells: Vec<(&LatticeState, f64)> = states
        .iter()
        .flat_map(|x| tau_grid.iter().map(move |&tau| (x, tau)))
        .collect();
    let rows: Vec<(f64, LatticeState, f64, f64)> = cells
        .par_iter()
        .map(|&(x, tau)| {
            let t = kernel.state_transition_pmf(net, x, tau, opts)?;
            let moment = t.pmf.expect(|y| norm.moment_weight(y, r));
            Ok((tau, x.clone(), moment, 1.0 - t.captured_mass))
        })
        .collect::<Result<_, VerifyError>>()?;
    Ok(certify(r, "tauleap", norm, rows))
}

/// Up to `per_axis` evenly spread values per coordinate of `[0, upper]^dim`,
/// always including `0` and `upper`.
pub fn box_states(dim: usize, upper: i64, per_axis: usize) -> Vec<LatticeState> {
    let per_axis = per_axis.max(2);
    let mut axis: Vec<i64> = (0..per_axis)
        .map(|i| ((upper as f64) * i as f64 / (per_axis - 1) as f64).round() as i64)
        .collect();
    axis.dedup();
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<i64>| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out.into_iter().map(LatticeState::new).collect()
}

/// `lambda_hat` on growing state boxes `[0, L]^N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformGrowthReport {
    pub r: u32,
    pub box_sizes: Vec<i64>,
    pub lambda_hats: Vec<f64>,
    /// `d log lambda_hat / d log L` over the last two boxes.
    pub growth_exponent: f64,
    pub max_growth_exponent: f64,
    pub uniform: bool,
}

/// Decides whether one `lambda_hat` serves every box: the rate must level off
/// as the box grows, with log-log growth over the last two boxes at most
/// `max_growth_exponent`.
#[allow(clippy::too_many_arguments)]
pub fn certify_uniform_growth(
    kernel: &TauLeapKernel,
    net: &ReactionNetwork,
    box_sizes: &[i64],
    per_axis: usize,
    r: u32,
    norm: &NormSpec,
    tau_grid: &[f64],
    max_growth_exponent: f64,
    opts: &EnumerationOptions,
) -> Result<UniformGrowthReport, VerifyError> {
    if box_sizes.len() < 2 || box_sizes.windows(2).any(|w| w[1] <= w[0]) || box_sizes[0] <= 0 {
        return Err(VerifyError::InvalidGrid(box_sizes.iter().map(|&b| b as f64).collect()));
    }
    let lambda_hats: Vec<f64> = box_sizes
        .iter()
        .map(|&l| {
            let states = box_states(net.n_species(), l, per_axis);
            estimate_tauleap_moment_growth(kernel, net, &states, r, norm, tau_grid, opts).map(|e| e.lambda_hat)
        })
        .collect::<Result<_, _>>()?;
    let k = box_sizes.len();
    let (l0, l1) = (lambda_hats[k - 2], lambda_hats[k - 1]);
    let growth_exponent = if l1 <= l0 {
        0.0
    } else if l0 <= 0.0 {
        f64::INFINITY
    } else {
        (l1 / l0).ln() / (box_sizes[k - 1] as f64 / box_sizes[k - 2] as f64).ln()
    };
    Ok(UniformGrowthReport {
        r,
        box_sizes: box_sizes.to_vec(),
        uniform: lambda_hats.iter().all(|l| l.is_finite()) && growth_exponent <= max_growth_exponent,
        lambda_hats,
        growth_exponent,
        max_growth_exponent,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepMomentBound {
    pub l: u32,
    /// Smallest `beta` with `m_l(x, tau) <= beta (1 + |x|^l) tau` on the grid.
    pub beta: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepMomentReport {
    pub kernel: String,
    pub superlinear: Vec<usize>,
    pub bounds: Vec<StepMomentBound>,
    /// Superlinear counts are bounded and cannot leave `Z_+^N` on their own.
    pub superlinear_bounded: bool,
    pub violations: Vec<String>,
    pub pass: bool,
}

/// Evaluates `m_l(x, tau) = E |K^(2)|^l`, the moments of the total count of
/// linearly bounded reactions, from the analytic count laws.
pub fn step_moment_bound_check(
    kernel: &TauLeapKernel,
    net: &ReactionNetwork,
    ls: &[u32],
    tau_grid: &[f64],
    states: &[LatticeState],
    norm: &NormSpec,
) -> Result<StepMomentReport, VerifyError> {
    check_grid(tau_grid, "step grid")?;
    for &l in ls {
        check_order(l)?;
    }
    norm.validate(Some(net.n_species()))?;
    let class = classify_growth(net);
    let l_max = ls.iter().copied().max().unwrap_or(0);
    let mut betas = vec![0.0f64; ls.len()];
    let mut violations = Vec::new();
    for x in states.iter().filter(|x| x.is_nonnegative()) {
        for &tau in tau_grid {
            let laws: Vec<_> = kernel
                .count_distributions(net, x, tau)?
                .iter()
                .enumerate()
                .map(|(j, d)| d.at(tau, j))
                .collect::<Result<_, _>>()?;
            let mut m = count_moments(&crate::tauleap::ConcreteCount::Zero, l_max);
            for j in (0..laws.len()).filter(|&j| class.linearly_bounded[j]) {
                m = sum_moments(&m, &count_moments(&laws[j], l_max));
            }
            for (slot, &l) in ls.iter().enumerate() {
                let ml = m[l as usize];
                if tau == 0.0 {
                    if ml != 0.0 {
                        violations.push(format!("m_{l}({x}, 0) = {ml} is not zero"));
                    }
                    continue;
                }
                betas[slot] = betas[slot].max(ml / (norm.moment_weight(x, l) * tau));
            }
            // Superlinear counts alone must keep the state in the orthant.
            let mut worst = x.coords().to_vec();
            for &j in &class.superlinear {
                match laws[j].support_max() {
                    Some(kmax) => {
                        for (w, &v) in worst.iter_mut().zip(net.nu(j)) {
                            if v < 0 {
                                *w += v * kmax as i64;
                            }
                        }
                    }
                    None => {
                        violations.push(format!("superlinear reaction {j} has unbounded count at {x}, tau = {tau}"));
                    }
                }
            }
            if worst.iter().any(|&w| w < 0) {
                violations.push(format!("superlinear counts can leave the orthant from {x}, tau = {tau}"));
            }
        }
    }
    violations.sort();
    violations.dedup();
    let bounds: Vec<StepMomentBound> = ls
        .iter()
        .zip(&betas)
        .map(|(&l, &beta)| StepMomentBound {
            l,
            beta,
            pass: beta.is_finite(),
        })
        .collect();
    let superlinear_bounded = !violations.iter().any(|v| v.contains("superlinear"));
    let pass = violations.is_empty() && bounds.iter().all(|b| b.pass);
    Ok(StepMomentReport {
        kernel: kernel.name().to_owned(),
        superlinear: class.superlinear,
        bounds,
        superlinear_bounded,
        violations,
        pass,
    })
}
