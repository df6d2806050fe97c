//! Seeded experiment runner for the `palmcox` library.
//!
//! Each subcommand reads one [`ExperimentConfig`], validates it completely,
//! runs its experiment on per-task random streams and writes CSV tables, a
//! JSON summary and optional SVG renders into the output directory. Reruns
//! with the same config and seed reproduce every byte, whatever the thread
//! count.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use std::fmt;
use std::process::ExitCode;

pub use commands::run;
pub use config::{ExperimentConfig, Overrides, ProcessKind, Resolved, OUT_ENV};
pub use output::Outcome;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    /// Dump one sampled configuration.
    Sample,
    /// Intensity estimate (plus count law and independence for Poisson).
    Intensity,
    /// Campbell identity for three test functions.
    Campbell,
    /// Slivnyak / Cox Palm constructions against the stationary process and
    /// the rerooting estimator.
    PalmCheck,
    /// Følner-driven Cox convergence report.
    CoxConverge,
    /// Voronoi raster and cell volumes.
    Voronoi,
    /// Highly adjacent coset pairs of one Cox sample.
    Adjacency,
    /// Average degree and giant component of the line + star union.
    Cost,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Intensity => "intensity",
            Command::Campbell => "campbell",
            Command::PalmCheck => "palm-check",
            Command::CoxConverge => "cox-converge",
            Command::Voronoi => "voronoi",
            Command::Adjacency => "adjacency",
            Command::Cost => "cost",
        }
    }

    /// Replicate count used when neither the config nor `--replicates` sets one.
    pub fn default_replicates(self) -> usize {
        match self {
            Command::Sample | Command::Voronoi | Command::Adjacency => 1,
            Command::Cost => 50,
            Command::Intensity | Command::Campbell | Command::PalmCheck | Command::CoxConverge => 10_000,
        }
    }

    pub const ALL: [Command; 8] = [
        Command::Sample,
        Command::Intensity,
        Command::Campbell,
        Command::PalmCheck,
        Command::CoxConverge,
        Command::Voronoi,
        Command::Adjacency,
        Command::Cost,
    ];
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] palmcox::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(exit::ERROR)
    }
}

/// Process exit statuses, shared by every subcommand.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const STATISTICAL_FAILURE: u8 = 1;
    pub const ERROR: u8 = 2;
}
