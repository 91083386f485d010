//! Library side of the `swanmech` command: config loading, command drivers
//! and sweeps. `main.rs` only parses arguments and maps errors to exit codes.

pub mod commands;
pub mod config;
pub mod output;
pub mod sweep;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] swanmech_core::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("best-response dynamics did not converge")]
    NotConverged,
}

impl CliError {
    /// 1 for bad input, 2 for an unattainable error requirement, 3 when the
    /// dynamics do not settle.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(swanmech_core::Error::Infeasible { .. }) => 2,
            CliError::NotConverged => 3,
            _ => 1,
        }
    }
}
