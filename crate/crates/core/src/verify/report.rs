use serde::Serialize;
use serde_json::{json, Value};

use super::{
    box_states, certify_uniform_growth, check_conservative, classify_growth, estimate_moment_growth,
    estimate_tauleap_moment_growth, find_alpha, step_moment_bound_check, AlphaSearch, MomentEngine,
    VerifyError, DEFAULT_ALPHA_BOUND,
};
use crate::exact::TruncationSpec;
use crate::metrics::{consistency_check, NormSpec};
use crate::model::ReactionNetwork;
use crate::pmf::LatticeState;
use crate::tauleap::{EnumerationOptions, TauLeapKernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    CertifiedOnGrid,
    NotChecked,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub verdict: Verdict,
    pub evidence: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub model_fingerprint: String,
    pub kernel: String,
    pub checks: Vec<CheckOutcome>,
    /// `Fail` if any check failed, otherwise `Pass`.
    pub overall: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    /// Norm for moment checks; `None` uses the alpha-weighted norm when an
    /// alpha vector exists and the 1-norm otherwise.
    pub norm: Option<NormSpec>,
    /// States are sampled from `[0, state_box]^N`.
    pub state_box: i64,
    pub per_axis: usize,
    pub taus: Vec<f64>,
    pub rs: Vec<u32>,
    pub ls: Vec<u32>,
    pub consistency_tolerance: f64,
    pub alpha_bound: u64,
    /// Boxes for the uniform-rate check; must end above `state_box`.
    pub growth_boxes: Vec<i64>,
    pub max_growth_exponent: f64,
    /// Exact-process moment check, run when set.
    pub exact: Option<(LatticeState, TruncationSpec, Vec<f64>)>,
    pub enumeration: EnumerationOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            norm: None,
            state_box: 20,
            per_axis: 6,
            taus: vec![0.1, 0.05, 0.025, 0.0125],
            rs: vec![1, 2, 3],
            ls: vec![1, 2, 3],
            consistency_tolerance: 1e-6,
            alpha_bound: DEFAULT_ALPHA_BOUND,
            growth_boxes: vec![10, 20, 40],
            max_growth_exponent: 0.25,
            exact: None,
            enumeration: EnumerationOptions::with_tolerance(1e-12),
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Runs the structural checks, first-order consistency, step-moment bounds
/// and the moment-growth certificates for `kernel` on `net`.
pub fn verify_network(
    net: &ReactionNetwork,
    kernel: &TauLeapKernel,
    opts: &VerifyOptions,
) -> Result<VerificationReport, VerifyError> {
    let mut checks = Vec::new();
    let n = net.n_species();
    let states = box_states(n, opts.state_box, opts.per_axis);

    let growth = classify_growth(net);
    checks.push(CheckOutcome {
        name: "polynomial_growth".into(),
        verdict: Verdict::Pass,
        evidence: to_value(&growth),
    });

    let conservative = check_conservative(net, &vec![0; n], &vec![opts.state_box; n]);
    checks.push(CheckOutcome {
        name: "conservativity".into(),
        verdict: if conservative.pass { Verdict::Pass } else { Verdict::Fail },
        evidence: to_value(&conservative),
    });

    let alpha = find_alpha(net, opts.alpha_bound);
    checks.push(CheckOutcome {
        name: "alpha_vector".into(),
        verdict: match alpha {
            AlphaSearch::Found(_) => Verdict::Pass,
            AlphaSearch::Infeasible { .. } => Verdict::Fail,
        },
        evidence: to_value(&alpha),
    });
    let norm = match (&opts.norm, alpha.certificate()) {
        (Some(n), _) => n.clone(),
        (None, Some(c)) => NormSpec::WeightedOneNorm(c.alpha.iter().map(|&a| a as f64).collect()),
        (None, None) => NormSpec::OneNorm,
    };

    match &opts.exact {
        Some((x0, trunc, t_grid)) => {
            let engine = MomentEngine::Cme {
                truncation: trunc.clone(),
            };
            let estimates = opts
                .rs
                .iter()
                .map(|&r| estimate_moment_growth(&engine, net, x0, r, &norm, t_grid))
                .collect::<Result<Vec<_>, _>>()?;
            let ok = estimates.iter().all(|e| e.certified);
            checks.push(CheckOutcome {
                name: "exact_moment_growth".into(),
                verdict: if ok { Verdict::CertifiedOnGrid } else { Verdict::Fail },
                evidence: json!(estimates
                    .iter()
                    .map(|e| json!({ "r": e.r, "lambda_hat": e.lambda_hat, "certified": e.certified, "grid_points": e.evidence.len() }))
                    .collect::<Vec<_>>()),
            });
        }
        None => checks.push(CheckOutcome {
            name: "exact_moment_growth".into(),
            verdict: Verdict::NotChecked,
            evidence: json!({ "note": "no initial state and truncation box configured" }),
        }),
    }

    let mut worst: Option<(f64, f64, LatticeState)> = None;
    let mut consistent = true;
    for x in &states {
        let rep = consistency_check(kernel, net, x, 1, opts.consistency_tolerance)?;
        consistent &= rep.pass;
        let ratio = rep.max_residual / rep.threshold;
        if worst.as_ref().is_none_or(|w| ratio > w.0) {
            worst = Some((ratio, rep.max_residual, x.clone()));
        }
    }
    let (ratio, residual, at) = worst.expect("state grid is non-empty");
    checks.push(CheckOutcome {
        name: "pointwise_consistency".into(),
        verdict: if consistent { Verdict::Pass } else { Verdict::Fail },
        evidence: json!({
            "q": 1,
            "states": states.len(),
            "tolerance": opts.consistency_tolerance,
            "worst_state": at,
            "worst_residual": residual,
            "worst_residual_over_threshold": ratio,
        }),
    });

    checks.push(CheckOutcome {
        name: "derivative_bound".into(),
        verdict: Verdict::NotChecked,
        evidence: json!({ "note": "implied by the moment-variation derivative bound, which the Poisson/binomial count structure provides" }),
    });

    let step = step_moment_bound_check(kernel, net, &opts.ls, &opts.taus, &states, &norm)?;
    checks.push(CheckOutcome {
        name: "step_moment_bound".into(),
        verdict: if step.pass { Verdict::Pass } else { Verdict::Fail },
        evidence: to_value(&step),
    });

    let mut growth_ok = true;
    let mut growth_evidence = Vec::new();
    for &r in &opts.rs {
        let est = estimate_tauleap_moment_growth(kernel, net, &states, r, &norm, &opts.taus, &opts.enumeration)?;
        let uniform = certify_uniform_growth(
            kernel,
            net,
            &opts.growth_boxes,
            opts.per_axis,
            r,
            &norm,
            &opts.taus,
            opts.max_growth_exponent,
            &opts.enumeration,
        )?;
        growth_ok &= est.certified && uniform.uniform;
        growth_evidence.push(json!({
            "r": r,
            "lambda_hat": est.lambda_hat,
            "certified": est.certified,
            "uniform": uniform,
        }));
    }
    checks.push(CheckOutcome {
        name: "tauleap_moment_growth".into(),
        verdict: if growth_ok { Verdict::CertifiedOnGrid } else { Verdict::Fail },
        evidence: json!({ "norm": norm, "taus": opts.taus, "per_r": growth_evidence }),
    });

    let overall = if checks.iter().any(|c| c.verdict == Verdict::Fail) {
        Verdict::Fail
    } else {
        Verdict::Pass
    };
    Ok(VerificationReport {
        model_fingerprint: net.fingerprint(),
        kernel: kernel.name().to_owned(),
        checks,
        overall,
    })
}
