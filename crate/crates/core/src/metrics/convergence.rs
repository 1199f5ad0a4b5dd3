use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::{moment_error, moment_variation, NormSpec};
use crate::exact::{cme_solve, CmeError, CmeSolution, TruncationSpec};
use crate::model::ReactionNetwork;
use crate::pmf::{LatticeState, SparsePmf};
use crate::tauleap::{EnumerationOptions, KernelError, Mesh, TauLeapKernel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConvergenceError {
    #[error("order fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("step sizes must be positive and strictly decreasing: {0:?}")]
    StepOrder(Vec<f64>),
    #[error("error values must be finite and non-negative: {0:?}")]
    InvalidErrors(Vec<f64>),
    #[error("final time {0} must be positive and finite")]
    InvalidTime(f64),
    #[error("no step sizes given")]
    NoSteps,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Oracle(#[from] CmeError),
}

/// Least-squares slope of `log err` against `log tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderFit {
    /// `f64::INFINITY` when some error is exactly zero.
    pub order: f64,
    pub stderr: f64,
    pub log_constant: f64,
}

pub fn fit_order(points: &[(f64, f64)]) -> Result<OrderFit, ConvergenceError> {
    let taus: Vec<f64> = points.iter().map(|p| p.0).collect();
    let errs: Vec<f64> = points.iter().map(|p| p.1).collect();
    if points.len() < 3 {
        return Err(ConvergenceError::TooFewPoints(points.len()));
    }
    check_taus(&taus)?;
    if errs.iter().any(|&e| !(e >= 0.0 && e.is_finite())) {
        return Err(ConvergenceError::InvalidErrors(errs));
    }
    if errs.contains(&0.0) {
        return Ok(OrderFit {
            order: f64::INFINITY,
            stderr: 0.0,
            log_constant: f64::NAN,
        });
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(OrderFit {
        order: slope,
        stderr: (ssr / (n - 2.0) / sxx).sqrt(),
        log_constant: intercept,
    })
}

fn check_taus(taus: &[f64]) -> Result<(), ConvergenceError> {
    let ok = taus.iter().all(|&t| t > 0.0 && t.is_finite()) && taus.windows(2).all(|w| w[1] < w[0]);
    if ok {
        Ok(())
    } else {
        Err(ConvergenceError::StepOrder(taus.to_vec()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceOptions {
    pub norm: NormSpec,
    pub enumeration: EnumerationOptions,
    /// A run is inconclusive when the weighted oracle loss exceeds this
    /// fraction of the smallest error.
    pub inconclusive_ratio: f64,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        Self {
            norm: NormSpec::OneNorm,
            enumeration: EnumerationOptions::with_tolerance(1e-13),
            inconclusive_ratio: 0.1,
        }
    }
}

/// Endpoint errors of one kernel on a family of uniform meshes, for one `r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub kernel: String,
    pub r: u32,
    pub norm: NormSpec,
    pub t_final: f64,
    pub taus: Vec<f64>,
    pub steps: Vec<usize>,
    /// `|p_hat(T) - p(T)|_r`; `r = 0` is the total variation distance.
    pub errors: Vec<f64>,
    /// `|E|Y(T)|^r - E|X(T)|^r|`.
    pub moment_errors: Vec<f64>,
    /// Oracle truncation loss plus push-forward enumeration loss.
    pub oracle_loss: Vec<f64>,
    /// `oracle_loss` times the largest `(1 + |x|^r) / 2` on the truncation box.
    pub weighted_loss: Vec<f64>,
    pub fitted_order: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub flags: Vec<String>,
    pub conclusive: bool,
}

impl ConvergenceReport {
    /// `tau,steps,error,moment_error,oracle_loss` rows.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["tau", "steps", "error", "moment_error", "oracle_loss"])
            .expect("in-memory write");
        for i in 0..self.taus.len() {
            w.write_record([
                format!("{:?}", self.taus[i]),
                self.steps[i].to_string(),
                format!("{:e}", self.errors[i]),
                format!("{:e}", self.moment_errors[i]),
                format!("{:e}", self.oracle_loss[i]),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }
}

/// Pushes `p0` through `kernel` on uniform meshes with the given maximal steps
/// and compares with the truncated master-equation solution at `t_final`.
#[allow(clippy::too_many_arguments)]
pub fn convergence_experiment(
    net: &ReactionNetwork,
    kernel: &TauLeapKernel,
    p0: &SparsePmf,
    t_final: f64,
    taus: &[f64],
    rs: &[u32],
    trunc: &TruncationSpec,
    opts: &ConvergenceOptions,
) -> Result<Vec<ConvergenceReport>, ConvergenceError> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(ConvergenceError::InvalidTime(t_final));
    }
    if taus.is_empty() {
        return Err(ConvergenceError::NoSteps);
    }
    check_taus(taus)?;
    opts.norm
        .validate(Some(net.n_species()))
        .map_err(|e| KernelError::NotCoverable(e.to_string()))?;
    let oracle: CmeSolution = cme_solve(net, p0, t_final, trunc)?;
    let meshes: Vec<Mesh> = taus
        .iter()
        .map(|&tau| Mesh::with_max_step(t_final, tau))
        .collect::<Result<_, _>>()?;
    let runs: Vec<(SparsePmf, f64)> = meshes
        .par_iter()
        .map(|mesh| {
            kernel
                .push_forward(net, p0, mesh, &opts.enumeration)
                .map(|pf| (pf.pmf, pf.mass_loss))
        })
        .collect::<Result<_, _>>()?;
    let corner = LatticeState::new(
        trunc
            .lower
            .iter()
            .zip(&trunc.upper)
            .map(|(&l, &u)| l.abs().max(u.abs()))
            .collect(),
    );
    let reports = rs
        .iter()
        .map(|&r| {
            let mut errors = Vec::new();
            let mut moment_errors = Vec::new();
            let mut oracle_loss = Vec::new();
            for (pmf, loss) in &runs {
                errors.push(moment_variation(&pmf.difference(&oracle.pmf), r, &opts.norm));
                moment_errors.push(moment_error(pmf, &oracle.pmf, r, &opts.norm));
                oracle_loss.push(oracle.truncation_loss + loss);
            }
            let top = 0.5 * opts.norm.moment_weight(&corner, r);
            let weighted_loss: Vec<f64> = oracle_loss.iter().map(|l| l * top).collect();
            let mut flags = Vec::new();
            let mut conclusive = true;
            let smallest = errors.iter().copied().fold(f64::INFINITY, f64::min);
            let worst_loss = weighted_loss.iter().copied().fold(0.0, f64::max);
            if worst_loss > opts.inconclusive_ratio * smallest {
                conclusive = false;
                flags.push(format!(
                    "oracle loss {worst_loss:e} exceeds {} of the smallest error {smallest:e}",
                    opts.inconclusive_ratio
                ));
            }
            let points: Vec<(f64, f64)> = taus.iter().copied().zip(errors.iter().copied()).collect();
            let (fitted_order, slope_stderr) = match fit_order(&points) {
                Ok(fit) => (Some(fit.order), Some(fit.stderr)),
                Err(e) => {
                    flags.push(format!("no slope fitted: {e}"));
                    (None, None)
                }
            };
            ConvergenceReport {
                kernel: kernel.name().to_owned(),
                r,
                norm: opts.norm.clone(),
                t_final,
                taus: taus.to_vec(),
                steps: meshes.iter().map(Mesh::n_steps).collect(),
                errors,
                moment_errors,
                oracle_loss,
                weighted_loss,
                fitted_order,
                slope_stderr,
                flags,
                conclusive,
            }
        })
        .collect();
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::library;

    #[test]
    fn synthetic_orders_are_recovered() {
        let taus = [0.25, 0.125, 0.0625, 0.03125];
        for q in [1, 2, 3] {
            let pts: Vec<(f64, f64)> = taus.iter().map(|&t: &f64| (t, 3.7 * t.powi(q))).collect();
            let fit = fit_order(&pts).unwrap();
            assert!((fit.order - q as f64).abs() < 1e-10, "{q}: {}", fit.order);
            assert!(fit.stderr < 1e-10);
            assert!((fit.log_constant - 3.7f64.ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(matches!(fit_order(&[(0.5, 1.0), (0.25, 0.5)]), Err(ConvergenceError::TooFewPoints(2))));
        assert!(fit_order(&[(0.25, 1.0), (0.5, 0.5), (0.1, 0.1)]).is_err());
        assert!(fit_order(&[(0.5, 1.0), (0.25, -0.5), (0.1, 0.1)]).is_err());
        let exact = fit_order(&[(0.5, 1.0), (0.25, 0.0), (0.1, 0.1)]).unwrap();
        assert_eq!(exact.order, f64::INFINITY);
    }

    #[test]
    fn fit_stderr_matches_hand_computation() {
        // log-errors off a line by +-d at alternate points.
        let taus = [1.0, 0.5, 0.25, 0.125];
        let d = 0.1f64;
        let pts: Vec<(f64, f64)> = taus
            .iter()
            .enumerate()
            .map(|(i, &t)| (t, t * (if i % 2 == 0 { d } else { -d }).exp()))
            .collect();
        let fit = fit_order(&pts).unwrap();
        // x = -i ln 2, centred x = (1.5, 0.5, -0.5, -1.5) ln 2; y residual pattern (d, -d, d, -d).
        let l2 = 2f64.ln();
        let sxx = 5.0 * l2 * l2;
        let sxy_pert = (1.5 - 0.5 - 0.5 + 1.5) * l2 * d;
        let slope = 1.0 + sxy_pert / sxx;
        assert!((fit.order - slope).abs() < 1e-12);
        let ssr: f64 = (0..4)
            .map(|i| {
                let x = (1.5 - i as f64) * l2;
                let y = if i % 2 == 0 { d } else { -d };
                (y - (slope - 1.0) * x).powi(2)
            })
            .sum();
        assert!((fit.stderr - (ssr / 2.0 / sxx).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_tau_is_flagged() {
        let net = library::decay(1.0);
        let p0 = SparsePmf::delta(LatticeState::from([5]));
        let trunc = TruncationSpec::new(vec![0], vec![5], 1e-10);
        let reports = convergence_experiment(
            &net,
            &TauLeapKernel::explicit(),
            &p0,
            1.0,
            &[0.25],
            &[0],
            &trunc,
            &ConvergenceOptions::default(),
        )
        .unwrap();
        assert_eq!(reports.len(), 1);
        assert!(reports[0].fitted_order.is_none());
        assert!(!reports[0].flags.is_empty());
        assert_eq!(reports[0].steps, vec![4]);
    }

    #[test]
    fn explicit_decay_is_first_order() {
        let net = library::decay(1.0);
        let p0 = SparsePmf::delta(LatticeState::from([5]));
        let trunc = TruncationSpec::new(vec![0], vec![5], 1e-10);
        let taus = [0.25, 0.125, 0.0625, 0.03125];
        let reports = convergence_experiment(
            &net,
            &TauLeapKernel::explicit(),
            &p0,
            1.0,
            &taus,
            &[0, 1],
            &trunc,
            &ConvergenceOptions::default(),
        )
        .unwrap();
        for rep in &reports {
            let q = rep.fitted_order.unwrap();
            assert!((0.8..=1.3).contains(&q), "r = {}: {q}", rep.r);
            assert!(rep.conclusive);
            for (e, m) in rep.errors.iter().zip(&rep.moment_errors) {
                assert!(*m <= 2.0 * e);
            }
        }
        assert!(reports[0].to_csv().starts_with("tau,steps,error"));
    }

    #[test]
    fn rejects_unsorted_taus() {
        let net = library::decay(1.0);
        let p0 = SparsePmf::delta(LatticeState::from([1]));
        let trunc = TruncationSpec::new(vec![0], vec![1], 1e-10);
        let err = convergence_experiment(
            &net,
            &TauLeapKernel::explicit(),
            &p0,
            1.0,
            &[0.1, 0.2],
            &[0],
            &trunc,
            &ConvergenceOptions::default(),
        );
        assert!(matches!(err, Err(ConvergenceError::StepOrder(_))));
    }
}
