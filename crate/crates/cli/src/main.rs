//! `epstar`: reproducible experiments on self-gravitating barotropic stars.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numerical
//! failure, 4 conservation flag (energy drift above the bound), 1 I/O failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::commands::Console;
use crate::config::RunConfig;
use crate::output::{OutputDir, Provenance};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    /// Tags a library error with the module that raised it.
    pub fn from_core(module: &str, e: epstar::Error) -> Self {
        if e.is_input_error() {
            CliError::Config(format!("{module}: {e}"))
        } else {
            CliError::Numeric(format!("{module}: {e}"))
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Io(m) => write!(f, "i/o failure: {m}"),
        }
    }
}

/// Successful outcomes of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// The run finished but drifted beyond the conservation bound.
    ConservationFlag,
}

#[derive(Parser)]
#[command(
    name = "epstar",
    version,
    about = "Steady states, stability and evolution of self-gravitating barotropic stars",
    after_long_help = concat!(
        "Exit codes: 0 ok, 2 configuration error, 3 numeric failure, 4 conservation flag.\n\n",
        "Reference configuration with all defaults:\n\n",
        include_str!("../../../configs/reference.toml")
    )
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides `out` in the configuration).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Random seed (overrides `seed` in the configuration).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Print nothing but errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Shoot the steady star and write its profile.
    Steady,
    /// Minimize the reduced energy directly and compare with the steady star.
    Minimize,
    /// Evolve a perturbed steady star with the finite-volume solver.
    Evolve,
    /// Kinetic reduction checks for the isotropic polytropic ansatz.
    Reduce,
    /// Run the full invariant suite.
    Check,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Steady => "steady",
            Command::Minimize => "minimize",
            Command::Evolve => "evolve",
            Command::Reduce => "reduce",
            Command::Check => "check",
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let console = Console { quiet: cli.quiet };
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let mut out = match OutputDir::create(&cfg.out) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let result = match cli.command {
        Command::Steady => commands::steady(&cfg, &mut out, &console),
        Command::Minimize => commands::minimize(&cfg, &mut out, &console),
        Command::Evolve => commands::evolve(&cfg, &mut out, &console),
        Command::Reduce => commands::reduce(&cfg, &mut out, &console),
        Command::Check => commands::check(&cfg, &mut out, &console),
    };
    let code = match &result {
        Ok(Status::Ok) => 0,
        Ok(Status::ConservationFlag) => 4,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    let provenance = Provenance {
        command: cli.command.name(),
        cli_version: env!("CARGO_PKG_VERSION"),
        core_version: epstar::VERSION,
        seed: cfg.seed,
        config: &cfg,
        outputs: out.written().to_vec(),
        exit_code: code,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    if let Err(e) = out.json("provenance.json", &provenance) {
        eprintln!("error: {e}");
        return ExitCode::from(if code == 0 { e.exit_code() } else { code });
    }
    ExitCode::from(code)
}
