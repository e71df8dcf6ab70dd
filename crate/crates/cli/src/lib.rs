//! Command-line driver: configuration, subcommands and exit codes.
//!
//! Exit codes: `0` success, `1` other runtime failure, `2` configuration
//! error, `3` resonant parameter, `4` divergence, `5` verification failure.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use qpresp::Error;

use commands::{RunContext, Status};
use config::ConfigError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RESONANT: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;
pub const EXIT_VERIFICATION: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "qpresp", version, about = "Quasi-periodic response solutions of forced ODEs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// Abort on the first failed ledger inequality.
    #[arg(long, global = true)]
    pub strict_ledger: bool,
    /// Worker threads for `sweep`.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Seed for sampled checks; overrides the config.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Averaged field, equilibrium and spectrum.
    Average,
    /// Normal form around the equilibrium.
    NormalForm,
    /// Full iteration; writes the report and the per-iteration table.
    Run,
    /// Excluded-parameter scan over an epsilon range.
    Sweep,
    /// Residual and oracle checks on a stored response.
    Verify {
        /// Response file: a `run` report or a bare series.
        #[arg(long, value_name = "PATH")]
        response: Option<PathBuf>,
    },
    /// Reduction to a first-order system with a rescaled parameter.
    Reduce,
    /// Ledger constants for every step, without iterating.
    Bounds,
}

/// Exit code for a failed command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return EXIT_CONFIG;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Resonant { .. }) => EXIT_RESONANT,
        Some(Error::Divergence { .. } | Error::MaxIterations { .. } | Error::RadiusExhausted { .. } | Error::NeumannDivergence { .. }) => EXIT_DIVERGENCE,
        Some(Error::LedgerViolation(_)) => EXIT_VERIFICATION,
        _ => EXIT_RUNTIME,
    }
}

fn dispatch(cli: &Cli) -> anyhow::Result<Status> {
    let path = cli.config.as_ref().ok_or_else(|| ConfigError("--config PATH is required".into()))?;
    let cfg = config::load(path)?;
    std::fs::create_dir_all(&cli.out).map_err(|e| ConfigError(format!("cannot create {}: {e}", cli.out.display())))?;
    let ctx = RunContext { cfg, out: cli.out.clone(), strict_ledger: cli.strict_ledger, seed: cli.seed };
    let work = || match &cli.command {
        Command::Average => commands::average(&ctx),
        Command::NormalForm => commands::normal_form(&ctx),
        Command::Run => commands::run(&ctx),
        Command::Sweep => commands::sweep(&ctx),
        Command::Verify { response } => commands::verify(&ctx, response.as_deref()),
        Command::Reduce => commands::reduce(&ctx),
        Command::Bounds => commands::bounds(&ctx),
    };
    match cli.threads {
        Some(0) => Err(ConfigError("--threads must be positive".into()).into()),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(work),
        None => work(),
    }
}

/// Runs the command and returns the process exit code; errors go to stderr.
pub fn run(cli: &Cli) -> i32 {
    match dispatch(cli) {
        Ok(Status::Ok) => EXIT_OK,
        Ok(Status::VerificationFailed) => {
            eprintln!("verification failed; see the report in {}", cli.out.display());
            EXIT_VERIFICATION
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
