//! Smooth convex minimization over trace-norm balls, trace-norm-regularized
//! objectives, and the spectrahedron, where Euclidean projections are computed
//! from rank-r truncated SVDs and *certified* at runtime to coincide with the
//! exact projection.
//!
//! The crate is organized around a simple pipeline:
//!
//! * [`linalg`] — dense and operator-based spectral computations (full SVD,
//!   randomized truncated SVD / symmetric eigensolver, simplex-threshold
//!   solves, multiplicity detection).
//! * [`projections`] — exact and certified-truncated projections onto the
//!   trace-norm ball and the spectrahedron, plus singular-value
//!   soft-thresholding for the regularized problem.
//! * [`objectives`] — smooth convex objectives (matrix completion, Frobenius
//!   distance, diagonal quadratics) evaluated on dense or factored points.
//! * [`solvers`] — projected gradient, accelerated gradient (strongly convex
//!   and general), proximal gradient, and mini-batch projected SGD, all
//!   parameterized by an exact or certified-truncated projection backend.
//! * [`diagnostics`] — gradient spectrum reports, certified-radius lower
//!   bounds, empirical radius probes, and rank-stability probes.
//! * [`constructions`] — analytic problem instances with closed-form optima
//!   used as ground-truth fixtures.

pub mod constructions;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod objectives;
pub mod projections;
pub mod solvers;

pub use error::{CertProjError, Result};
pub use linalg::{LinOp, LowRankMatrix, SparseMatrix, SpectralDecomposition};
pub use projections::{CertifiedProjection, EscalationPolicy};
pub use solvers::{Geometry, RankMode, SolverConfig, SolverTrace};

