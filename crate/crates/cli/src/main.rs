//! `tfd`: relaxation tables, fractional derivatives of sampled data, solver
//! runs, subordinator simulation, and the validation suite.
//!
//! Exit codes: 0 on success, 1 when validation checks fail, 2 on usage,
//! configuration, or runtime errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Run(String),
    #[error("validation failed: {}", .0.join(", "))]
    Validation(Vec<String>),
}

impl From<tfd_core::Error> for CliError {
    fn from(e: tfd_core::Error) -> Self {
        match e {
            tfd_core::Error::InvalidParameter { .. } => CliError::Config(e.to_string()),
            other => CliError::Run(other.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProfileArg {
    Fast,
    Thorough,
}

#[derive(Debug, Parser)]
#[command(name = "tfd", version, about = "Tempered fractional diffusion on bounded intervals")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file (directory for `simulate`); stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Validation profile.
    #[arg(long, global = true, value_enum)]
    profile: Option<ProfileArg>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate ǧ_λ(t, μ), its time derivative, and the derivative bound.
    Relax,
    /// Fractional derivative of samples read from a `t,value` CSV.
    Derivative,
    /// Solve the tempered fractional Cauchy problem on an interval or box.
    Solve,
    /// Simulate subordinator paths and first-passage times.
    Simulate,
    /// Run the cross-validation suite and emit a JSON report.
    Validate,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Run(e.to_string()))?;
    }
    let needs_config = || {
        cli.config
            .as_deref()
            .ok_or_else(|| CliError::Usage("--config PATH is required".into()))
    };
    let out = cli.out.as_deref();
    match cli.command {
        Command::Relax => commands::relax(needs_config()?, out),
        Command::Derivative => commands::derivative(needs_config()?, out),
        Command::Solve => commands::solve(needs_config()?, out, cli.seed),
        Command::Simulate => commands::simulate(needs_config()?, out, cli.seed),
        Command::Validate => {
            let profile = cli.profile.map(|p| match p {
                ProfileArg::Fast => "fast",
                ProfileArg::Thorough => "thorough",
            });
            commands::validate(cli.config.as_deref(), out, cli.seed, profile)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tfd: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
