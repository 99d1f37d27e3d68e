//! Library half of the `ratesim` command-line harness: experiment
//! configuration, row-per-time-point execution with optional parallelism,
//! convergence studies, and deterministic CSV/JSON serialization. The
//! binary in `main.rs` is a thin argument-parsing shell over this crate.

pub mod config;
pub mod experiment;
pub mod output;

use ratesim_core::CoreError;

pub use config::{EvolverKind, ExperimentConfig, ModelKind, PictureKind, QuantitySet};
pub use experiment::{
    convergence_study, run_experiment, ConvergenceRow, ConvergenceStudy, ExperimentOutput,
    ResultRow,
};

/// Process-level error classification. The variants map one-to-one onto the
/// binary's exit codes: configuration problems exit 1, numerical divergence
/// exits 2, failed validation checks exit 3.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// A configuration field is missing, malformed, or inconsistent.
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },
    /// The numerics produced non-finite results.
    #[error("numerical divergence: {0}")]
    Divergence(String),
    /// One or more validation checks failed.
    #[error("{failed} validation check(s) failed")]
    Validation { failed: usize },
    /// Filesystem trouble while reading config or writing results.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl From<CoreError> for HarnessError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::Divergence { .. } => HarnessError::Divergence(err.to_string()),
            other => HarnessError::Config {
                field: "model".to_string(),
                message: other.to_string(),
            },
        }
    }
}

impl HarnessError {
    /// The process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } | HarnessError::Io(_) => 1,
            HarnessError::Divergence(_) => 2,
            HarnessError::Validation { .. } => 3,
        }
    }
}
