use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tauleap_cli::config::parse_list;
use tauleap_cli::{run, Command, ConfigError, ExperimentConfig, Overrides, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "tauleap", version, about = "Tau-leap convergence experiments on reaction networks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample endpoint states with SSA or a tau-leap kernel.
    Simulate(Flags),
    /// Measure tau-leap errors against the master-equation oracle.
    Converge(Flags),
    /// Check the convergence conditions for a model and kernel.
    Verify(Flags),
    /// Solve the truncated master equation.
    Oracle(Flags),
}

#[derive(Args)]
struct Flags {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Reaction network file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// ssa, explicit, midpoint or remm.
    #[arg(long)]
    kernel: Option<String>,
    /// Initial state, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Step sizes, comma separated, strictly decreasing.
    #[arg(long)]
    tau: Option<String>,
    /// Moment orders, comma separated.
    #[arg(long)]
    r: Option<String>,
    /// Final time.
    #[arg(long = "T")]
    t_final: Option<f64>,
    /// Number of endpoint samples for simulate.
    #[arg(long)]
    samples: Option<usize>,
}

fn load(flags: &Flags) -> Result<ExperimentConfig, ConfigError> {
    let overrides = Overrides {
        model_path: flags.model.clone(),
        kernel: flags.kernel.clone(),
        x0: flags.x0.as_deref().map(parse_list).transpose()?,
        seed: flags.seed,
        out: flags.out.clone(),
        tau_list: flags.tau.as_deref().map(parse_list).transpose()?,
        r_list: flags.r.as_deref().map(parse_list).transpose()?,
        t_final: flags.t_final,
        samples: flags.samples,
    };
    let mut cfg = match &flags.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::from_overrides(&overrides)?,
    };
    cfg.apply(&overrides);
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, flags) = match &cli.command {
        Cmd::Simulate(f) => (Command::Simulate, f),
        Cmd::Converge(f) => (Command::Converge, f),
        Cmd::Verify(f) => (Command::Verify, f),
        Cmd::Oracle(f) => (Command::Oracle, f),
    };
    let cfg = match load(flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    match run(cmd, &cfg) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.code == 0 {
                println!("{}", outcome.message);
            } else {
                eprintln!("{}", outcome.message);
            }
            ExitCode::from(outcome.code as u8)
        }
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code as u8)
        }
    }
}
