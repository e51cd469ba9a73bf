//! `skm`: run the invariant suite and the Monte-Carlo limit experiments.
//!
//! Exit codes: 0 pass, 1 failed check or runtime error, 2 usage or config error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use crate::config::{ConfigError, RunConfig, DEFAULT_CONFIG};

#[derive(Parser)]
#[command(name = "skm", version, about = "Small-mass limit experiments for a damped stochastic wave system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration (defaults to the built-in one).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override simulation.master_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override simulation.M.
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Override output.directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override any key, e.g. `--set physics.eps=[0.5,0.1]`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Deterministic identities and semigroup bounds.
    Verify,
    /// μ-sweep of the coupled sup error at the first ε.
    Skm,
    /// ε-sweeps of the first- and second-order systems.
    Friction,
    /// Oscillating-integral variance and the frictionless failure floor.
    Counterexample,
    /// One coupled trajectory of both systems.
    Simulate,
}

fn load(cli: &Cli) -> anyhow::Result<RunConfig> {
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p)
            .with_context(|| format!("reading {}", p.display()))
            .map_err(|e| ConfigError(format!("{e:#}")))?,
        None => DEFAULT_CONFIG.to_string(),
    };
    let mut overrides = cli.set.clone();
    if let Some(s) = cli.seed {
        overrides.push(format!("simulation.master_seed={s}"));
    }
    if let Some(m) = cli.paths {
        overrides.push(format!("simulation.M={m}"));
    }
    if let Some(o) = &cli.out {
        overrides.push(format!("output.directory={}", toml::Value::String(o.display().to_string())));
    }
    let cfg = RunConfig::load(&text, &overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<skm_core::Error>() {
        Some(skm_core::Error::InvalidArgument(_)) | Some(skm_core::Error::Precondition(_)) => 2,
        _ => 1,
    }
}

fn run(cli: &Cli) -> anyhow::Result<commands::Outcome> {
    let cfg = load(cli)?;
    match cli.command {
        Command::Verify => commands::verify(&cfg),
        Command::Skm => commands::skm(&cfg),
        Command::Friction => commands::friction(&cfg),
        Command::Counterexample => commands::counterexample(&cfg),
        Command::Simulate => commands::simulate(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            println!("wrote {}", commands::describe_files(&out.files));
            if out.passed {
                ExitCode::SUCCESS
            } else {
                println!("FAILED");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
