//! Dense and operator-based spectral computations.
//!
//! Dense matrices are plain `nalgebra::DMatrix<f64>`; everything that must
//! scale (matrix completion gradients, factored iterates) goes through the
//! [`LinOp`] trait so no large matrix is ever materialized.

mod decomposition;
mod lowrank;
mod operator;
mod sparse;
mod threshold;
mod truncated;

pub use decomposition::{full_svd, symmetric_eigen_dense, DecompositionKind, SpectralDecomposition};
pub use lowrank::LowRankMatrix;
pub use operator::{check_adjoint_consistency, DenseOp, LinOp, Negated, SparsePlusLowRank};
pub use sparse::SparseMatrix;
pub use threshold::{simplex_threshold, simplex_threshold_signed, value_multiplicity};
pub use truncated::{truncated_eigen_sym, truncated_svd};

use crate::error::{CertProjError, Result};
use nalgebra::DMatrix;

/// Row-major dense matrix of reals; the carrier for small exact computations.
pub type DenseMatrix = DMatrix<f64>;

/// Checks that a dense matrix is non-empty with all entries finite.
pub fn validate_dense(a: &DenseMatrix, name: &str) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(CertProjError::input(format!("{name}: empty matrix")));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(CertProjError::input(format!(
            "{name}: non-finite entry in {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

/// Checks symmetry up to `tol` relative to max(1, largest |entry|).
pub fn validate_symmetric(a: &DenseMatrix, tol: f64, name: &str) -> Result<()> {
    validate_dense(a, name)?;
    if a.nrows() != a.ncols() {
        return Err(CertProjError::input(format!(
            "{name}: expected square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = a.iter().fold(1.0_f64, |m, &x| m.max(x.abs()));
    let mut worst = 0.0_f64;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if worst > tol * scale {
        return Err(CertProjError::input(format!(
            "{name}: asymmetry {worst:.3e} exceeds tolerance {:.3e}",
            tol * scale
        )));
    }
    Ok(())
}
