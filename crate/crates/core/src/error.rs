use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
///
/// Variants are grouped by the kind of failure rather than by module so that
/// the CLI can map them onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric parameter is out of its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// A structural specification (drift layout, sparsity plan) is inconsistent.
    #[error("invalid specification: {0}")]
    Spec(String),
    /// An observation or data cell violates the input contract.
    #[error("invalid input: {0}")]
    Input(String),
    /// Detector or ensemble configuration is unusable.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Imputation cannot produce a complete matrix.
    #[error("imputation failed: {0}")]
    Imputation(String),
    /// Imputer selection could not run; the caller should fall back to defaults.
    #[error("imputer selection failed: {0}")]
    Selection(String),
    /// No default imputer is known for the requested family.
    #[error("no default imputation method for {0}")]
    NoDefault(String),
    /// A bound or statistic is mathematically inapplicable to its arguments.
    #[error("not applicable: {0}")]
    Validity(String),
    /// Detector outputs fed to the ensemble are out of step.
    #[error("sequencing error: {0}")]
    Sequencing(String),
    /// A CSV cell could not be parsed.
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },
    /// The file layout does not match the expected schema.
    #[error("schema error: {0}")]
    Schema(String),
    #[error("i/o error on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
