//! Experiment harness around the solver library: MovieLens-format ingestion,
//! construction fixtures, solver configuration, per-iteration logs, and a
//! final report with the dataset id, optimum rank, gradient multiplicity,
//! minimal certified rank, MSE, and spectral gap.

pub mod config;
pub mod experiment;
pub mod ingest;

pub use config::{ConstructionSpec, ExperimentConfig, InputSource, SolverKind};
pub use experiment::{run_experiment, ExperimentOutcome, ExperimentReport, LogRecord};
pub use ingest::{ingest_movielens, IngestStats};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),

    #[error(transparent)]
    Solver(#[from] certproj::CertProjError),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for certificate failures under the error policy,
    /// 3 for input problems (4, cap-hit without convergence, is decided by
    /// the caller from the report).
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(e) => match unwrap_solver(e) {
                certproj::CertProjError::CertificateFailed { .. } => 2,
                _ => 3,
            },
            _ => 3,
        }
    }
}

fn unwrap_solver(e: &certproj::CertProjError) -> &certproj::CertProjError {
    match e {
        certproj::CertProjError::SolverCertificate { source, .. } => unwrap_solver(source),
        other => other,
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
