//! Command-line front end for `pnflow-core`.
//!
//! [`run`] parses arguments, dispatches to a subcommand and returns the
//! process exit code:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | usage error or unreadable input |
//! | 2 | the integrator failed |
//! | 3 | experiment initial data rejected |
//! | 4 | experiment count mismatch or failed invariant check |

pub mod check;
pub mod config;
pub mod experiment;
pub mod flow;
mod output;
pub mod portrait;

use std::ffi::OsString;
use std::fmt;

use clap::{Parser, Subcommand};

pub use config::ConfigFile;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INTEGRATOR: i32 = 2;
pub const EXIT_BAD_INITIAL_DATA: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "pnflow",
    version,
    about = "Ricci flow on the Gromoll-Meyer type spaces P_n"
)]
pub struct Cli {
    /// JSON file with per-subcommand defaults; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one of the flow systems and write a CSV trajectory.
    Flow(flow::FlowArgs),
    /// Run the negative-eigenvalue experiment and write a JSON report.
    Experiment(experiment::ExperimentArgs),
    /// Render the (phi, psi) vector field as SVG.
    Portrait(portrait::PortraitArgs),
    /// Run the invariant grid and print a pass/fail table.
    Check(check::CheckArgs),
}

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::usage(e.to_string())
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Flow(a) => flow::cmd_flow(&a.overlay(file.flow.unwrap_or_default())),
        Command::Experiment(a) => {
            experiment::cmd_experiment(&a.overlay(file.experiment.unwrap_or_default()))
        }
        Command::Portrait(a) => {
            portrait::cmd_portrait(&a.overlay(file.portrait.unwrap_or_default()))
        }
        Command::Check(a) => check::cmd_check(&a.overlay(file.check.unwrap_or_default())),
    }
}
