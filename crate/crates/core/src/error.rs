//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CertProjError>;

#[derive(Debug, Error)]
pub enum CertProjError {
    /// Invalid input data (non-finite entries, out-of-range indices, bad
    /// argument combinations). The message names the offending argument.
    #[error("input error: {0}")]
    Input(String),

    /// Iterative spectral computation did not reach the requested residual
    /// tolerance within the iteration cap. Best-effort values and residuals
    /// are attached so callers can inspect how far the run got.
    #[error("truncated spectral solve did not converge: max residual {max_residual:.3e} > tol after {iterations} iterations")]
    SvdNoConvergence {
        iterations: usize,
        max_residual: f64,
        values: Vec<f64>,
        residuals: Vec<f64>,
    },

    /// The rank-r certificate failed and the escalation policy did not allow
    /// recovery. Carries the singular (or eigen) values seen at the final
    /// attempted rank.
    #[error("projection certificate failed at rank {rank}: head sum {head_sum:.6e} < {target:.6e} + {rank} * {next_value:.6e}")]
    CertificateFailed {
        rank: usize,
        head_sum: f64,
        next_value: f64,
        target: f64,
        values: Vec<f64>,
    },

    /// Solver configuration problem (e.g. calling the strongly convex method
    /// on an objective with no strong convexity).
    #[error("solver configuration error: {0}")]
    Config(String),

    /// A certificate failure surfaced during a solver run, tagged with the
    /// iteration at which it occurred.
    #[error("iteration {iteration}: {source}")]
    SolverCertificate {
        iteration: usize,
        #[source]
        source: Box<CertProjError>,
    },
}

impl CertProjError {
    pub fn input(msg: impl Into<String>) -> Self {
        CertProjError::Input(msg.into())
    }

    pub fn at_iteration(self, iteration: usize) -> Self {
        CertProjError::SolverCertificate {
            iteration,
            source: Box::new(self),
        }
    }
}
