use std::path::PathBuf;

use thiserror::Error;

use bowtie_core::circuit::CircuitError;
use bowtie_core::coupling::CouplingError;
use bowtie_core::fieldmap::FieldMapError;
use bowtie_core::nvspin::SpinError;
use bowtie_core::spectroscopy::SpectroscopyError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Spin(#[from] SpinError),
    #[error(transparent)]
    FieldMap(#[from] FieldMapError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Spectroscopy(#[from] SpectroscopyError),
    #[error("{}: {msg}", path.display())]
    Config { path: PathBuf, msg: String },
    #[error("missing required key `{key}` (or flag {flag})")]
    MissingKey { key: &'static str, flag: &'static str },
    #[error("{0}")]
    Invalid(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("written output {} failed validation: {msg}", path.display())]
    Validation { path: PathBuf, msg: String },
}

impl CliError {
    pub fn module(&self) -> &'static str {
        match self {
            CliError::Circuit(_) => "circuit",
            CliError::Spin(_) => "nvspin",
            CliError::FieldMap(_) => "fieldmap",
            CliError::Coupling(_) => "coupling",
            CliError::Spectroscopy(_) => "spectroscopy",
            _ => "cli",
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Circuit(e) => e.code(),
            CliError::Spin(e) => e.code(),
            CliError::FieldMap(e) => e.code(),
            CliError::Coupling(e) => e.code(),
            CliError::Spectroscopy(e) => e.code(),
            CliError::Config { .. } => "config",
            CliError::MissingKey { .. } => "missing_key",
            CliError::Invalid(_) => "invalid_argument",
            CliError::Io { .. } => "io",
            CliError::Validation { .. } => "validation",
        }
    }
}
