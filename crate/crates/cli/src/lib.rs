//! Command-line driver: matrix file I/O, run configuration and the four
//! experiment commands.

pub mod commands;
pub mod config;
pub mod io;
pub mod problem;

use std::path::Path;

use thiserror::Error;

pub use config::{CommandKind, NormChoice, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("synthesis infeasible: {0}")]
    Infeasible(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Input(format!("{}: {e}", path.display()))
    }
}

impl From<sparsedisc::Error> for CliError {
    fn from(e: sparsedisc::Error) -> Self {
        use sparsedisc::Error as E;
        match e {
            E::AllInfeasible | E::MaskIdentityConflict(_) => CliError::Infeasible(e.to_string()),
            E::SingularPencil { .. } | E::ContractViolation(_) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(format!("writing CSV: {e}"))
    }
}

/// Run one command to completion.
pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    match cfg.command {
        CommandKind::Discretize => commands::discretize(cfg),
        CommandKind::Bounds => commands::bounds(cfg),
        CommandKind::Synthesize => commands::synthesize_command(cfg),
        CommandKind::Simulate => commands::simulate(cfg),
    }
}
