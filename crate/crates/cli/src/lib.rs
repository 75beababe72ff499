//! Configuration-driven experiment runner: closed-form bin rates, scheme
//! maps, throughput sweeps, scheduling and Monte Carlo validation, all
//! written as CSV.

pub mod commands;
pub mod config;
pub mod table;

use std::path::PathBuf;

pub use commands::{run_command, Command, Report};
pub use config::{Experiment, ExperimentConfig};
pub use table::Table;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] netmimo::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    /// 1 for bad inputs, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } | CliError::Csv(_) => 1,
            CliError::Model(e) if e.is_config() => 1,
            CliError::Model(_) | CliError::Numerical(_) => 2,
        }
    }
}
