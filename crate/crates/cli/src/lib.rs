//! Library side of the `shockprice` command-line tool: configuration parsing
//! and the CSV-producing subcommands.

pub mod commands;
pub mod config;

pub use commands::{cmd_converge, cmd_hedge, cmd_price, cmd_ttm, fmt_sig, Report};
pub use config::{parse_list, ConfigError, RunConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Model(#[from] shockprice_core::Error),
    #[error("cannot write {path}: {reason}")]
    Output { path: String, reason: String },
    #[error("{0} check(s) failed")]
    Acceptance(usize),
}

impl CliError {
    /// 2 for bad input, 3 for numerical failure, 4 for failed checks.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Output { .. } => 2,
            CliError::Model(e) if e.is_numerical() => 3,
            CliError::Model(_) => 2,
            CliError::Acceptance(_) => 4,
        }
    }
}
