//! Command-line front end: `plan`, `reproduce`, `argue`, `simulate`.

pub mod commands;
pub mod config;
pub mod error;
mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "safety-bounds",
    version,
    about = "Statistical safety bounds for an emergency-braking function"
)]
pub struct Cli {
    /// Toolkit config file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for CSV and JSON artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimal trials and km for a confidence split.
    Plan(commands::plan::PlanArgs),
    /// Regenerate the published table and sample-size curves.
    Reproduce(commands::reproduce::ReproduceArgs),
    /// Evidence to bounds to verdict, with a GSN export.
    Argue(commands::argue::ArgueArgs),
    /// Monte Carlo run of the braking scenario.
    Simulate(commands::simulate::SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Globals {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render().ansi());
            return if e.use_stderr() {
                error::EXIT_USAGE
            } else {
                error::EXIT_OK
            };
        }
    };
    let globals = Globals {
        config: cli.config,
        out: cli.out,
        seed: cli.seed,
    };
    let result = match cli.command {
        Command::Plan(a) => commands::plan::run(&globals, &a, stdout),
        Command::Reproduce(a) => commands::reproduce::run(&globals, &a, stdout),
        Command::Argue(a) => commands::argue::run(&globals, &a, stdout),
        Command::Simulate(a) => commands::simulate::run(&globals, &a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
