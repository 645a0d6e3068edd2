//! Driver for the fraclab experiments: config handling, dispatch and artifacts.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use config::RunConfig;
pub use report::{Check, Report};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Library(#[from] fraclab::Error),

    #[error("{command}: {source}")]
    Command {
        command: &'static str,
        source: fraclab::Error,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// 2 for bad input, 3 for failures while computing.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Library(fraclab::Error::Parameter(_)) => 2,
            CliError::Command {
                source: fraclab::Error::Parameter(_),
                ..
            } => 2,
            _ => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Exterior basis: orthonormality, moments and the decay table.
    Basis,
    /// Decay slopes over a sweep of dimensions and orders.
    Decay,
    /// Γ(q) for a bump potential, entry decay, counting and the norm chain.
    Gamma,
    /// Closest pair of Γ images over a bump family.
    Instability,
    /// Minimal-norm Runge controls against the target degree.
    Approx,
    /// Truncated Hilbert transform SVD and the 1D control growth.
    Hilbert,
    /// The exponentially growing extension example.
    Hadamard,
    /// Every command above, in order.
    All,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Basis => "basis",
            Command::Decay => "decay",
            Command::Gamma => "gamma",
            Command::Instability => "instability",
            Command::Approx => "approx",
            Command::Hilbert => "hilbert",
            Command::Hadamard => "hadamard",
            Command::All => "all",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "fraclab",
    version,
    about = "Numerical experiments on fractional Schrödinger equations and their Dirichlet-to-Neumann maps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML config, or a previous report.json to rerun its config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory; each command writes into its own subdirectory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Mantissa bits for the radial orthogonalization.
    #[arg(long, global = true)]
    pub precision: Option<usize>,

    /// Overrides any config key, e.g. `--set basis.cap=8` or `--set s=0.25`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl Cli {
    pub fn resolve_config(&self) -> Result<RunConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        for assignment in &self.overrides {
            config.set(assignment)?;
        }
        if let Some(out) = &self.out {
            config.out = out.clone();
        }
        if let Some(threads) = self.threads {
            config.threads = threads;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(bits) = self.precision {
            config.precision_bits = bits;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Validates the config and runs `command` on a pool of `config.threads` workers.
pub fn run(command: Command, config: &RunConfig) -> Result<Report, CliError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| commands::dispatch(command, config))
}
