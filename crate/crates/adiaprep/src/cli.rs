//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::commands;
use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FitModel {
    ErrorDensity,
    ExpDecay,
    PowerLaw,
}

#[derive(Debug, Parser)]
#[command(name = "adiaprep", version, about = "Adiabatic preparation of PEPS-derived chain states")]
pub struct Cli {
    /// Experiment manifest (prepare, ed-evolve).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Output directory; overrides the manifest.
    #[arg(long, global = true, env = "ADIAPREP_OUT")]
    pub out: Option<PathBuf>,
    /// Worker threads; overrides the manifest.
    #[arg(long, global = true, env = "ADIAPREP_JOBS")]
    pub jobs: Option<usize>,
    /// Fit window `LO:HI` on the independent variable.
    #[arg(long, global = true)]
    pub window: Option<String>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the TEBD sweep of a manifest.
    Prepare,
    /// Run the exact-evolution sweep of a manifest.
    EdEvolve,
    /// Spectral gap of H(s) along the path by exact diagonalization.
    Gap {
        #[arg(long)]
        family: String,
        /// Qubit counts.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Point count `K` or `LO:HI:K`.
        #[arg(long, default_value = "41")]
        grid: String,
    },
    /// Fit scaling models to run records.
    Fit {
        /// Glob selecting run record JSON files.
        #[arg(long)]
        input: String,
        #[arg(long, value_enum)]
        model: FitModel,
    },
    /// Sample an interpolation schedule.
    Schedule {
        /// `sin2-1d`, `sin2-2d`, `beta` or `beta:k=<k>`.
        #[arg(long)]
        kind: String,
        /// Smoothness order for `beta`.
        #[arg(long)]
        k: Option<u32>,
        #[arg(long, default_value_t = 101)]
        samples: usize,
    },
    /// Bond dimensions, correlation length and parent-Hamiltonian energy of
    /// `|ψ(s)⟩`.
    State {
        #[arg(long)]
        family: String,
        /// Qubit count.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        s: f64,
    },
}

/// Parses and runs; returns the text destined for stdout.
pub fn run<I, T>(args: I) -> CliResult<String>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Ok(e.to_string()),
                _ => Err(CliError::Usage(e.to_string())),
            };
        }
    };
    let window = cli.window.as_deref().map(commands::parse_window).transpose()?;
    let manifest = || {
        cli.manifest
            .clone()
            .ok_or_else(|| CliError::Usage("this command needs --manifest PATH".into()))
    };
    match &cli.command {
        Command::Prepare => commands::cmd_prepare(&manifest()?, cli.out.as_deref(), cli.jobs),
        Command::EdEvolve => commands::cmd_ed_evolve(&manifest()?, cli.out.as_deref(), cli.jobs),
        Command::Gap { family, sizes, grid } => {
            commands::cmd_gap(family, sizes, grid, cli.out.as_deref(), cli.jobs, cli.format)
        }
        Command::Fit { input, model } => {
            commands::cmd_fit(input, *model, window, cli.out.as_deref(), cli.format)
        }
        Command::Schedule { kind, k, samples } => {
            commands::cmd_schedule(kind, *k, *samples, cli.out.as_deref(), cli.format)
        }
        Command::State { family, n, s } => commands::cmd_state(family, *n, *s, cli.format),
    }
}
