//! `amptrace`: generate, aggregate and analyze heavy-tailed On/Off traffic
//! traces, and validate the closed-form model against generated data.
//!
//! Exit codes: 0 success, 1 configuration or input-value error, 2 I/O or
//! trace-format error, 3 validation failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use crate::commands::ValidationFailed;
use crate::config::{Mode, RunConfig};

/// Default output directory when neither `--out` nor the config sets one.
const OUT_DIR_ENV: &str = "AMPTRACE_OUT_DIR";

#[derive(Parser)]
#[command(name = "amptrace", version, about = "Heavy-tailed On/Off traffic synthesis and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory [default: $AMPTRACE_OUT_DIR, then the current directory].
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Multiplier applied to every validation tolerance.
    #[arg(long, global = true)]
    tolerance_scale: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Single-source trace: event CSV, binned CSV and a load summary.
    Generate,
    /// N-source aggregate trace with capacity and marginal summaries.
    Aggregate,
    /// Estimators and plot data for a trace file (binned or event CSV).
    Analyze {
        /// Trace file; defaults to the config's `input`.
        input: Option<PathBuf>,
    },
    /// Model-versus-data check battery.
    Validate,
    /// Model predictions for the configured source without simulation.
    Report,
}

impl Command {
    fn mode(&self) -> Mode {
        match self {
            Command::Generate => Mode::Generate,
            Command::Aggregate => Mode::Aggregate,
            Command::Analyze { .. } => Mode::Analyze,
            Command::Validate => Mode::Validate,
            Command::Report => Mode::Report,
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ValidationFailed>() {
            return 3;
        }
        if cause.is::<std::io::Error>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<amp_core::Error>() {
            return match e {
                amp_core::Error::Io(_) | amp_core::Error::Parse { .. } => 2,
                _ => 1,
            };
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(m) = cfg.mode {
        if m != cli.command.mode() {
            bail!("config declares mode {m:?} but the {:?} subcommand was run", cli.command.mode());
        }
    }
    if let Some(t) = cli.tolerance_scale {
        if !(t.is_finite() && t >= 0.0) {
            bail!("--tolerance-scale must be finite and >= 0, got {t}");
        }
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out).with_context(|| format!("creating output directory {}", out.display()))?;
    let seed = cli.seed.or(cfg.seed).or(cfg.source.map(|s| s.seed)).unwrap_or(0);
    match &cli.command {
        Command::Generate => commands::generate(&cfg, seed, &out),
        Command::Aggregate => commands::aggregate(&cfg, seed, &out),
        Command::Analyze { input } => {
            let input = input.clone().or_else(|| cfg.input.clone()).context("no trace file given")?;
            commands::analyze(&cfg, &input, &out)
        }
        Command::Validate => {
            let report = commands::validate(&cfg, cli.seed.or(cfg.seed), cli.tolerance_scale.or(cfg.tolerance_scale), &out)?;
            if report.pass {
                Ok(())
            } else {
                Err(ValidationFailed.into())
            }
        }
        Command::Report => commands::report(&cfg, seed, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
