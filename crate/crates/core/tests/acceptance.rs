//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on failure.

use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;
use tauleap_core::exact::{cme_solve, empirical_pmf, ssa_ensemble, SsaOptions, TruncationSpec};
use tauleap_core::metrics::{
    consistency_check, convergence_experiment, moment_variation,
    norm_comparison_constant, tv_distance, ConvergenceOptions, ConvergenceReport, NormSpec,
};
use tauleap_core::model::{library, ReactionNetwork};
use tauleap_core::pmf::{LatticeState, SparsePmf};
use tauleap_core::rng::stream_rng;
use tauleap_core::tauleap::{EnumerationOptions, Mesh, RemmOverrides, TauLeapKernel};
use tauleap_core::verify::{
    binomial_moment, box_states, certify_uniform_growth, estimate_tauleap_moment_growth,
    find_alpha, poisson_moment,
};

const RATES: [f64; 4] = [0.1, 0.5, 0.3, 0.4];
const TAUS: [f64; 4] = [0.25, 0.125, 0.0625, 0.03125];

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn net() -> ReactionNetwork {
    library::binding_birth_death(RATES)
}

fn remm(net: &ReactionNetwork) -> TauLeapKernel {
    TauLeapKernel::remm(net, &RemmOverrides::default()).expect("example network is REMM-coverable")
}

fn x0() -> LatticeState {
    LatticeState::from([5, 5, 5])
}

/// `x1 + x3 = 10` is conserved; `x2` is unbounded and gets a generous range.
fn oracle_box() -> TruncationSpec {
    TruncationSpec::new(vec![0, 0, 0], vec![10, 70, 10], 1e-10)
}

fn slope_ok(rep: &ConvergenceReport, max_stderr: Option<f64>) -> bool {
    let in_range = rep.fitted_order.is_some_and(|q| (0.8..=1.3).contains(&q));
    let stderr_ok = max_stderr.is_none_or(|m| rep.slope_stderr.is_some_and(|s| s <= m));
    in_range && stderr_ok && rep.conclusive && rep.oracle_loss.iter().all(|&l| l <= 1e-8)
}

fn describe(rep: &ConvergenceReport) -> String {
    format!(
        "{} r={} slope={:.4} stderr={:.4} errors={:?} max_loss={:.1e}",
        rep.kernel,
        rep.r,
        rep.fitted_order.unwrap_or(f64::NAN),
        rep.slope_stderr.unwrap_or(f64::NAN),
        rep.errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>(),
        rep.oracle_loss.iter().copied().fold(0.0, f64::max),
    )
}

fn run(kernel: &TauLeapKernel, rs: &[u32]) -> Vec<ConvergenceReport> {
    let net = net();
    convergence_experiment(
        &net,
        kernel,
        &SparsePmf::delta(x0()),
        1.0,
        &TAUS,
        rs,
        &oracle_box(),
        &ConvergenceOptions::default(),
    )
    .expect("convergence pipeline runs")
}

/// REMM reports for r = 0 and r = 2, shared by the first two criteria.
fn remm_reports() -> &'static [ConvergenceReport] {
    static REPORTS: OnceLock<Vec<ConvergenceReport>> = OnceLock::new();
    REPORTS.get_or_init(|| run(&remm(&net()), &[0, 2]))
}

fn criterion_1() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for rep in [&remm_reports()[0], &run(&TauLeapKernel::explicit(), &[0])[0]] {
        pass &= slope_ok(rep, Some(0.15));
        detail.push(describe(rep));
    }
    Outcome {
        pass,
        detail: detail.join("; "),
    }
}

fn criterion_2() -> Outcome {
    let rep = &remm_reports()[1];
    // Exact inequality, checked on the raw floating-point values.
    let bounded = rep
        .moment_errors
        .iter()
        .zip(&rep.errors)
        .all(|(m, e)| *m <= 2.0 * e);
    Outcome {
        pass: slope_ok(rep, None) && bounded,
        detail: format!("{}; moment_errors={:?} moment_error<=2|g|_2: {bounded}", describe(rep), rep.moment_errors),
    }
}

fn criterion_3() -> Outcome {
    let net = net();
    let mut rng = stream_rng(2024, 0);
    let states: Vec<LatticeState> = (0..10)
        .map(|_| LatticeState::new((0..3).map(|_| rng.random_range(0..=15)).collect()))
        .collect();
    let explicit = TauLeapKernel::explicit();
    let remm = remm(&net);
    let mut explicit_max: f64 = 0.0;
    let mut remm_rel: f64 = 0.0;
    let mut fd_rel: f64 = 0.0;
    for x in &states {
        let e = consistency_check(&explicit, &net, x, 1, 1e-12).unwrap();
        explicit_max = explicit_max.max(e.max_residual);
        let r = consistency_check(&remm, &net, x, 1, 1e-6).unwrap();
        remm_rel = remm_rel.max(r.max_residual / (1.0 + net.total_propensity(x)));
        // Independent check of the analytic derivatives used above: one-sided
        // differences of the count pmf with two Richardson levels.
        for c in &r.residuals {
            let f = |t: f64| remm.count_pmf(&net, x, t, &c.counts).unwrap();
            let d = |h: f64| (-3.0 * f(0.0) + 4.0 * f(h) - f(2.0 * h)) / (2.0 * h);
            let (r1, r2) = ((4.0 * d(5e-4) - d(1e-3)) / 3.0, (4.0 * d(2.5e-4) - d(5e-4)) / 3.0);
            let fd = (8.0 * r2 - r1) / 7.0;
            fd_rel = fd_rel.max((fd - c.method).abs() / (1.0 + c.method.abs()));
        }
    }
    let x = x0();
    let doubled = consistency_check(&TauLeapKernel::explicit_scaled(2.0), &net, &x, 1, 1e-6).unwrap();
    let a = net.propensities(&x);
    let control_matches = (0..4).all(|j| {
        let mut k = vec![0u64; 4];
        k[j] = 1;
        doubled
            .residuals
            .iter()
            .find(|c| c.counts == k)
            .is_some_and(|c| (c.residual - a[j]).abs() <= 1e-9 * a[j].max(1.0))
    });
    let pass = explicit_max <= 1e-12 && remm_rel <= 1e-6 && fd_rel <= 1e-6 && !doubled.pass && control_matches;
    Outcome {
        pass,
        detail: format!(
            "explicit max residual {explicit_max:.1e}; remm max relative residual {remm_rel:.1e}; \
             finite-difference deviation {fd_rel:.1e}; doubled-rate control fails={} with residual = a_j(x): {control_matches}",
            !doubled.pass
        ),
    }
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let net = net();
    let search = find_alpha(&net, 20);
    let elapsed = start.elapsed().as_secs_f64();
    let nu1 = net.nu(0);
    let dot = |a: &[u64]| a.iter().zip(nu1).map(|(&a, &v)| a as i64 * v).sum::<i64>();
    let ones_ok = dot(&[1, 1, 1]) <= 0;
    match search.certificate() {
        Some(c) => {
            let pass = c.alpha.iter().all(|&a| a > 0) && dot(&c.alpha) <= 0 && ones_ok && elapsed < 1.0;
            Outcome {
                pass,
                detail: format!(
                    "alpha={:?} alpha.nu_1={} (1,1,1) feasible={ones_ok} in {elapsed:.4}s",
                    c.alpha,
                    dot(&c.alpha)
                ),
            }
        }
        None => Outcome {
            pass: false,
            detail: "no alpha found".into(),
        },
    }
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let decay = library::decay(1.0);
    let mut decay_err: f64 = 0.0;
    for t in [0.1f64, 0.5, 1.0, 2.5, 7.0] {
        let sol = cme_solve(
            &decay,
            &SparsePmf::delta(LatticeState::from([1])),
            t,
            &TruncationSpec::new(vec![0], vec![1], 1e-12),
        )
        .unwrap();
        decay_err = decay_err
            .max((sol.pmf.get(&LatticeState::from([1])) - (-t).exp()).abs())
            .max((sol.pmf.get(&LatticeState::from([0])) - (1.0 - (-t).exp())).abs());
    }
    let net = net();
    let oracle = cme_solve(&net, &SparsePmf::delta(x0()), 0.5, &oracle_box()).unwrap();
    let samples = ssa_ensemble(&net, &x0(), 0.5, 100_000, 7, SsaOptions::default()).unwrap();
    let tv = tv_distance(&empirical_pmf(&samples), &oracle.pmf);
    let elapsed = start.elapsed().as_secs_f64();
    Outcome {
        pass: decay_err <= 1e-10 && tv <= 0.02 && elapsed < 120.0,
        detail: format!(
            "decay closed-form max error {decay_err:.1e}; SSA(1e5) vs CME TV at T=0.5 = {tv:.4} \
             (oracle loss {:.1e}); {elapsed:.1}s",
            oracle.truncation_loss
        ),
    }
}

fn criterion_6() -> Outcome {
    let mut worst: f64 = 0.0;
    for &lambda in &[0.0f64, 0.05, 0.3, 1.0, 2.2, 3.7, 5.0] {
        for r in 0..=6u32 {
            // Tail of the direct sum past k is below 1e-14 relative.
            let mut p = (-lambda).exp();
            let mut sum = if r == 0 { p } else { 0.0 };
            let mut k = 0u64;
            loop {
                k += 1;
                p *= lambda / k as f64;
                let term = (k as f64).powi(r as i32) * p;
                sum += term;
                if k as f64 > lambda && term < 1e-16 * sum.max(1e-300) {
                    break;
                }
                if lambda == 0.0 {
                    break;
                }
            }
            let got = poisson_moment(lambda, r);
            worst = worst.max(rel(got, sum));
        }
    }
    for n in 0..=50u64 {
        for &p in &[0.0f64, 0.01, 0.25, 0.5, 0.73, 0.99, 1.0] {
            for r in 0..=6u32 {
                let exact: f64 = (0..=n)
                    .map(|k| {
                        let c: f64 = (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
                        let pk = if k == 0 && p == 0.0 { 1.0 } else { c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32) };
                        (k as f64).powi(r as i32) * pk
                    })
                    .sum();
                worst = worst.max(rel(binomial_moment(n, p, r), exact));
            }
        }
    }
    Outcome {
        pass: worst <= 1e-10,
        detail: format!("max relative deviation {worst:.1e} over lambda<=5, n<=50, r<=6"),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(1e-300)
    }
}

fn criterion_7() -> Outcome {
    let net = net();
    let kernels = [TauLeapKernel::explicit(), TauLeapKernel::midpoint(), remm(&net)];
    let opts = EnumerationOptions::default();
    let mut zero_ok = true;
    for k in &kernels {
        for x in box_states(3, 12, 4) {
            let t = k.state_transition_pmf(&net, &x, 0.0, &opts).unwrap();
            zero_ok &= t.pmf == SparsePmf::delta(x.clone()) && t.captured_mass == 1.0;
        }
    }
    let mut freeze_ok = true;
    let meshes = [
        Mesh::uniform(1.0, 1).unwrap(),
        Mesh::uniform(1.0, 7).unwrap(),
        Mesh::new(vec![0.0, 0.01, 0.3, 0.35, 2.0]).unwrap(),
    ];
    for k in &kernels {
        for x in [[-1, 5, 5], [3, -2, 0], [0, 0, -7], [-4, -4, -4]] {
            let d = SparsePmf::delta(LatticeState::from(x));
            for mesh in &meshes {
                let pf = k.push_forward(&net, &d, mesh, &opts).unwrap();
                freeze_ok &= pf.pmf == d && pf.mass_loss == 0.0;
            }
        }
    }
    Outcome {
        pass: zero_ok && freeze_ok,
        detail: format!("zero-step identity exact={zero_ok}; negative states fixed by push-forward={freeze_ok}"),
    }
}

fn criterion_8() -> Outcome {
    let net = net();
    let kernel = remm(&net);
    let alpha = find_alpha(&net, 20).certificate().unwrap().alpha.clone();
    let norm = NormSpec::weighted(alpha.iter().map(|&a| a as f64).collect()).unwrap();
    let taus = [0.1, 0.075, 0.05, 0.025, 0.01, 0.005, 0.001];
    let states = box_states(3, 20, 6);
    let opts = EnumerationOptions::with_tolerance(1e-12);
    let mut pass = true;
    let mut detail = Vec::new();
    for r in [1, 2, 3] {
        let est = estimate_tauleap_moment_growth(&kernel, &net, &states, r, &norm, &taus, &opts).unwrap();
        let worst_loss = est.evidence.iter().map(|e| e.loss).fold(0.0, f64::max);
        let ok = est.certified && est.lambda_hat.is_finite() && worst_loss <= 1e-9;
        pass &= ok;
        detail.push(format!("r={r} lambda_hat={:.4} certified={ok}", est.lambda_hat));
    }
    let control = certify_uniform_growth(
        &TauLeapKernel::explicit(),
        &library::superlinear_birth(1.0),
        &[10, 20, 40],
        11,
        1,
        &NormSpec::OneNorm,
        &taus,
        0.25,
        &opts,
    )
    .unwrap();
    pass &= !control.uniform;
    detail.push(format!(
        "superlinear-birth control lambda_hats={:?} growth exponent {:.2} uniform={}",
        control.lambda_hats.iter().map(|l| format!("{l:.2}")).collect::<Vec<_>>(),
        control.growth_exponent,
        control.uniform
    ));
    Outcome {
        pass,
        detail: detail.join("; "),
    }
}

fn criterion_9() -> Outcome {
    let mut rng = stream_rng(99, 0);
    // Dyadic weights and integer moment weights keep every sum exact in f64.
    let random_measure = |rng: &mut tauleap_core::rng::SimRng| {
        let n = rng.random_range(0..15);
        SparsePmf::from_entries(
            (0..n).map(|_| {
                (
                    LatticeState::new(vec![rng.random_range(-5..=5), rng.random_range(-5..=5)]),
                    rng.random_range(-256i32..=256) as f64 / 64.0,
                )
            }),
            true,
        )
    };
    let norm = NormSpec::OneNorm;
    let mut triangle = true;
    let mut homogeneous = true;
    for _ in 0..100 {
        let g = random_measure(&mut rng);
        let h = random_measure(&mut rng);
        let c = [-4.0, -0.5, 0.25, 2.0, 8.0][rng.random_range(0..5)];
        for r in 0..=3 {
            let mut sum = g.clone();
            sum.add_scaled(&h, 1.0);
            triangle &= moment_variation(&sum, r, &norm) <= moment_variation(&g, r, &norm) + moment_variation(&h, r, &norm);
            homogeneous &= moment_variation(&g.scaled(c), r, &norm) == c.abs() * moment_variation(&g, r, &norm);
        }
    }
    let mut prob_ok = true;
    for _ in 0..20 {
        let n = rng.random_range(1..20);
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(1..=64) as f64).collect();
        let total: f64 = raw.iter().sum();
        let p = SparsePmf::from_entries(
            raw.iter().enumerate().map(|(i, w)| (LatticeState::from([i as i64 * 3 - 10]), w / total)),
            false,
        );
        prob_ok &= (moment_variation(&p, 0, &norm) - 1.0).abs() <= 1e-15;
    }
    let alpha = norm_comparison_constant(1, 2, &[-5, -5], &[5, 5], &norm).unwrap();
    let mut comparison = true;
    for _ in 0..100 {
        let g = random_measure(&mut rng);
        comparison &= moment_variation(&g, 1, &norm) <= alpha * moment_variation(&g, 2, &norm);
    }
    let delta0 = SparsePmf::delta(LatticeState::from([0, 0]));
    comparison &= moment_variation(&delta0, 1, &norm) == 0.5 && moment_variation(&delta0, 2, &norm) == 0.5;
    Outcome {
        pass: triangle && homogeneous && prob_ok && comparison && alpha == 1.0,
        detail: format!(
            "triangle={triangle} homogeneity={homogeneous} |p|_0=1: {prob_ok}; comparison alpha={alpha} holds={comparison}"
        ),
    }
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 first-order TV convergence (REMM, explicit)", criterion_1),
        ("2 first-order moment-variation convergence r=2", criterion_2),
        ("3 pointwise consistency q=1", criterion_3),
        ("4 alpha certificate", criterion_4),
        ("5 oracle validation", criterion_5),
        ("6 Poisson/binomial moment recursions", criterion_6),
        ("7 zero-step and freeze invariants", criterion_7),
        ("8 tau-leap moment growth certificate", criterion_8),
        ("9 moment-variation norm properties", criterion_9),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let out = f();
        let status = if out.pass { "PASS" } else { "FAIL" };
        if !out.pass {
            failed += 1;
        }
        println!(
            "{status} criterion {name} [{:.1}s]: {}",
            start.elapsed().as_secs_f64(),
            out.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
