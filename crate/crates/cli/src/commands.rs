//! The four subcommands. Each writes its files under `config.out` and returns
//! the process exit code; errors carry their own code.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use tauleap_core::exact::{cme_solve, ssa_ensemble, CmeError, SsaOptions, TruncationSpec};
use tauleap_core::io::{write_pmf_csv, PmfSidecar};
use tauleap_core::metrics::{convergence_experiment, ConvergenceError, ConvergenceOptions};
use tauleap_core::model::{parse_network, ReactionNetwork};
use tauleap_core::pmf::{LatticeState, SparsePmf};
use tauleap_core::rng::stream_rng;
use tauleap_core::tauleap::{KernelError, KernelName, Mesh, TauLeapKernel};
use tauleap_core::verify::{verify_network, Verdict, VerifyError, VerifyOptions};
use tauleap_core::VERSION;

use crate::config::ExperimentConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_GUARDED: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Converge,
    Verify,
    Oracle,
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl Failure {
    fn config(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_CONFIG,
            error: error.into(),
        }
    }

    fn guarded(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_GUARDED,
            error: error.into(),
        }
    }
}

/// Files written by a successful or guarded-failure run.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub files: Vec<PathBuf>,
    pub message: String,
}

/// Provenance block embedded in every output.
#[derive(Debug, Clone, Serialize)]
struct Stamp {
    version: &'static str,
    config_hash: String,
    model_hash: String,
}

impl Stamp {
    fn comment_lines(&self) -> String {
        format!(
            "# version: {}\n# config_hash: {}\n# model_hash: {}\n",
            self.version, self.config_hash, self.model_hash
        )
    }

    fn metadata(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("version".to_owned(), self.version.to_owned()),
            ("config_hash".to_owned(), self.config_hash.clone()),
            ("model_hash".to_owned(), self.model_hash.clone()),
        ])
    }
}

struct Run {
    cfg: ExperimentConfig,
    net: ReactionNetwork,
    stamp: Stamp,
}

pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    cfg.validate().map_err(Failure::config)?;
    let path = cfg
        .model_path
        .as_ref()
        .ok_or_else(|| Failure::config(anyhow!("no model given; set model_path or pass --model")))?;
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read model file {}", path.display()))
        .map_err(Failure::config)?;
    let net = parse_network(&text)
        .with_context(|| format!("in model file {}", path.display()))
        .map_err(Failure::config)?;
    if cfg.x0.len() != net.n_species() {
        return Err(Failure::config(anyhow!(
            "x0 has {} entries but the model has {} species",
            cfg.x0.len(),
            net.n_species()
        )));
    }
    let stamp = Stamp {
        version: VERSION,
        config_hash: cfg.hash(),
        model_hash: net.fingerprint(),
    };
    fs::create_dir_all(&cfg.out)
        .with_context(|| format!("cannot create output directory {}", cfg.out.display()))
        .map_err(Failure::config)?;
    let ctx = Run {
        cfg: cfg.clone(),
        net,
        stamp,
    };
    match cmd {
        Command::Simulate => simulate(&ctx),
        Command::Converge => converge(&ctx),
        Command::Verify => verify(&ctx),
        Command::Oracle => oracle(&ctx),
    }
}

fn write(dir: &Path, name: &str, contents: &str, files: &mut Vec<PathBuf>) -> Result<(), Failure> {
    let path = dir.join(name);
    fs::write(&path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::config)?;
    files.push(path);
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("outputs serialize");
    s.push('\n');
    s
}

fn tau_kernel(ctx: &Run) -> Result<TauLeapKernel, Failure> {
    let name = ctx.cfg.kernel.as_deref().unwrap_or("explicit");
    if name == "ssa" {
        return Err(Failure::config(anyhow!("kernel `ssa` is only valid for simulate")));
    }
    let name: KernelName = name.parse().map_err(Failure::config)?;
    if ctx.cfg.kernel_rate_scale != 1.0 {
        return Ok(TauLeapKernel::explicit_scaled(ctx.cfg.kernel_rate_scale));
    }
    TauLeapKernel::by_name(name, &ctx.net).map_err(Failure::config)
}

fn truncation(ctx: &Run) -> Result<&TruncationSpec, Failure> {
    ctx.cfg
        .truncation
        .as_ref()
        .ok_or_else(|| Failure::config(anyhow!("this command needs a `truncation` box in the config")))
}

fn x0(ctx: &Run) -> LatticeState {
    LatticeState::new(ctx.cfg.x0.clone())
}

/// Mean with a normal-approximation 95% interval.
#[derive(Debug, Serialize)]
struct Estimate {
    mean: Option<f64>,
    std_dev: Option<f64>,
    ci95: Option<[f64; 2]>,
}

fn estimate(values: &[f64]) -> Estimate {
    let n = values.len();
    if n == 0 {
        return Estimate {
            mean: None,
            std_dev: None,
            ci95: None,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let half = 1.96 * (var / n as f64).sqrt();
    Estimate {
        mean: Some(mean),
        std_dev: Some(var.sqrt()),
        ci95: Some([mean - half, mean + half]),
    }
}

fn simulate(ctx: &Run) -> Result<Outcome, Failure> {
    let cfg = &ctx.cfg;
    let n = cfg.samples;
    let x0 = x0(ctx);
    let engine = cfg.kernel.as_deref().unwrap_or("ssa");
    let samples: Vec<LatticeState> = if engine == "ssa" {
        ssa_ensemble(&ctx.net, &x0, cfg.t_final, n, cfg.seed, SsaOptions::default()).map_err(Failure::guarded)?
    } else {
        let kernel = tau_kernel(ctx)?;
        let &tau = cfg
            .tau_list
            .first()
            .ok_or_else(|| Failure::config(anyhow!("tau-leap simulation needs a step in tau_list")))?;
        let mesh = Mesh::with_max_step(cfg.t_final, tau).map_err(Failure::config)?;
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream_rng(cfg.seed, i as u64);
                kernel
                    .simulate_mesh(&ctx.net, &x0, &mesh, &mut rng)
                    .map(|p| p.final_state().clone())
            })
            .collect::<Result<_, KernelError>>()
            .map_err(Failure::guarded)?
    };

    let mut csv = ctx.stamp.comment_lines();
    csv.push_str("sample");
    for s in ctx.net.species() {
        let _ = write!(csv, ",{s}");
    }
    csv.push('\n');
    for (i, x) in samples.iter().enumerate() {
        let _ = write!(csv, "{i}");
        for c in x.coords() {
            let _ = write!(csv, ",{c}");
        }
        csv.push('\n');
    }

    let norm = cfg.norm.clone().unwrap_or_default();
    let species: Vec<Value> = ctx
        .net
        .species()
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let v: Vec<f64> = samples.iter().map(|x| x.coords()[j] as f64).collect();
            json!({ "species": name, "count": estimate(&v) })
        })
        .collect();
    let moments: Vec<Value> = cfg
        .r_list
        .iter()
        .map(|&r| {
            let v: Vec<f64> = samples.iter().map(|x| norm.eval(x).powi(r as i32)).collect();
            json!({ "r": r, "moment": estimate(&v) })
        })
        .collect();
    let summary = json!({
        "stamp": ctx.stamp,
        "engine": engine,
        "samples": n,
        "T": cfg.t_final,
        "seed": cfg.seed,
        "norm": norm,
        "species": species,
        "moments": moments,
    });

    let mut files = Vec::new();
    write(&cfg.out, "simulate_endpoints.csv", &csv, &mut files)?;
    write(&cfg.out, "simulate_summary.json", &to_json(&summary), &mut files)?;
    Ok(Outcome {
        code: EXIT_OK,
        files,
        message: format!("{n} endpoint samples at T = {}", cfg.t_final),
    })
}

fn oracle_failure(e: CmeError) -> Failure {
    match e {
        CmeError::BoxTooSmall { .. } | CmeError::SeriesDiverged | CmeError::RateOverflow(_) => Failure::guarded(e),
        _ => Failure::config(e),
    }
}

fn converge(ctx: &Run) -> Result<Outcome, Failure> {
    let cfg = &ctx.cfg;
    let kernel = tau_kernel(ctx)?;
    let trunc = truncation(ctx)?;
    if cfg.tau_list.is_empty() {
        return Err(Failure::config(anyhow!("converge needs a non-empty tau_list")));
    }
    let opts = ConvergenceOptions {
        norm: cfg.norm.clone().unwrap_or_default(),
        ..ConvergenceOptions::default()
    };
    let reports = convergence_experiment(
        &ctx.net,
        &kernel,
        &SparsePmf::delta(x0(ctx)),
        cfg.t_final,
        &cfg.tau_list,
        &cfg.r_list,
        trunc,
        &opts,
    )
    .map_err(|e| match e {
        ConvergenceError::Oracle(c) => oracle_failure(c),
        ConvergenceError::Kernel(
            k @ (KernelError::EnumerationTooLarge { .. } | KernelError::SupportTooLarge { .. }),
        ) => Failure::guarded(k),
        other => Failure::config(other),
    })?;

    let mut files = Vec::new();
    for rep in &reports {
        let csv = format!("{}{}", ctx.stamp.comment_lines(), rep.to_csv());
        write(&cfg.out, &format!("converge_r{}.csv", rep.r), &csv, &mut files)?;
    }
    write(
        &cfg.out,
        "converge.json",
        &to_json(&json!({ "stamp": ctx.stamp, "reports": reports })),
        &mut files,
    )?;
    let inconclusive: Vec<String> = reports
        .iter()
        .filter(|r| !r.conclusive)
        .map(|r| format!("r = {}: {}", r.r, r.flags.join("; ")))
        .collect();
    let fits: Vec<String> = reports
        .iter()
        .map(|r| match r.fitted_order {
            Some(q) => format!("r = {}: order {q:.3}", r.r),
            None => format!("r = {}: no fit", r.r),
        })
        .collect();
    Ok(if inconclusive.is_empty() {
        Outcome {
            code: EXIT_OK,
            files,
            message: fits.join(", "),
        }
    } else {
        Outcome {
            code: EXIT_GUARDED,
            files,
            message: format!("inconclusive: {}", inconclusive.join(", ")),
        }
    })
}

fn verify(ctx: &Run) -> Result<Outcome, Failure> {
    let cfg = &ctx.cfg;
    let kernel = tau_kernel(ctx)?;
    let mut opts = VerifyOptions {
        norm: cfg.norm.clone(),
        ..VerifyOptions::default()
    };
    if !cfg.tau_list.is_empty() {
        opts.taus = cfg.tau_list.clone();
    }
    let rs: Vec<u32> = cfg.r_list.iter().copied().filter(|&r| r >= 1).collect();
    if !rs.is_empty() {
        opts.rs = rs;
    }
    if let Some(trunc) = &cfg.truncation {
        if cfg.t_final > 0.0 {
            let t = cfg.t_final;
            opts.exact = Some((x0(ctx), trunc.clone(), vec![t / 4.0, t / 2.0, t]));
        }
    }
    let report = verify_network(&ctx.net, &kernel, &opts).map_err(|e| match e {
        VerifyError::Oracle(c) => oracle_failure(c),
        e @ (VerifyError::Contaminated { .. } | VerifyError::Ssa(_)) => Failure::guarded(e),
        e @ VerifyError::Kernel(KernelError::EnumerationTooLarge { .. } | KernelError::SupportTooLarge { .. }) => {
            Failure::guarded(e)
        }
        other => Failure::config(other),
    })?;
    let mut files = Vec::new();
    write(
        &cfg.out,
        "verify.json",
        &to_json(&json!({ "stamp": ctx.stamp, "report": report })),
        &mut files,
    )?;
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| c.verdict == Verdict::Fail)
        .map(|c| c.name.as_str())
        .collect();
    Ok(Outcome {
        code: if report.overall == Verdict::Fail { EXIT_GUARDED } else { EXIT_OK },
        files,
        message: if failed.is_empty() {
            format!("{} checks, none failed", report.checks.len())
        } else {
            format!("failed checks: {}", failed.join(", "))
        },
    })
}

fn oracle(ctx: &Run) -> Result<Outcome, Failure> {
    let cfg = &ctx.cfg;
    let trunc = truncation(ctx)?;
    let sol = cme_solve(&ctx.net, &SparsePmf::delta(x0(ctx)), cfg.t_final, trunc).map_err(oracle_failure)?;
    let mut meta = ctx.stamp.metadata();
    meta.insert("time".into(), format!("{:?}", cfg.t_final));
    meta.insert("truncation_loss".into(), format!("{:e}", sol.truncation_loss));
    let csv = write_pmf_csv(&sol.pmf, ctx.net.species(), &meta);
    let sidecar = PmfSidecar {
        version: VERSION.to_owned(),
        config_hash: ctx.stamp.config_hash.clone(),
        model_hash: ctx.stamp.model_hash.clone(),
        time: cfg.t_final,
        truncation_loss: sol.truncation_loss,
        seed: None,
        support_size: sol.pmf.support_len(),
        total_mass: sol.pmf.total_mass(),
    };
    let mut files = Vec::new();
    write(&cfg.out, "oracle.csv", &csv, &mut files)?;
    write(&cfg.out, "oracle.json", &to_json(&sidecar), &mut files)?;
    Ok(Outcome {
        code: EXIT_OK,
        files,
        message: format!(
            "{} states at T = {}, truncation loss {:e}",
            sidecar.support_size, cfg.t_final, sol.truncation_loss
        ),
    })
}
