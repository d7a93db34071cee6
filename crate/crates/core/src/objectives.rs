//! Smooth convex objectives over matrices, evaluated on dense or factored
//! points. Gradients come back dense, sparse, or sparse-plus-ridge so solvers
//! can keep the gradient-step matrix in operator form.

use crate::error::{CertProjError, Result};
use crate::linalg::{DenseMatrix, LinOp, LowRankMatrix, SparseMatrix, SparsePlusLowRank};
use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A point handed to an objective: either a small dense matrix or a factored
/// iterate. Entry access on a factored point costs O(rank).
#[derive(Clone, Copy)]
pub enum MatrixRef<'a> {
    Dense(&'a DenseMatrix),
    Factored(&'a LowRankMatrix),
}

impl<'a> MatrixRef<'a> {
    pub fn rows(&self) -> usize {
        match self {
            MatrixRef::Dense(a) => a.nrows(),
            MatrixRef::Factored(x) => x.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            MatrixRef::Dense(a) => a.ncols(),
            MatrixRef::Factored(x) => x.cols(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match self {
            MatrixRef::Dense(a) => a[(i, j)],
            MatrixRef::Factored(x) => x.entry(i, j),
        }
    }

    pub fn fro_norm_sq(&self) -> f64 {
        match self {
            MatrixRef::Dense(a) => a.iter().map(|x| x * x).sum(),
            MatrixRef::Factored(x) => x.singular_values().iter().map(|s| s * s).sum(),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            MatrixRef::Dense(a) => (*a).clone(),
            MatrixRef::Factored(x) => x.to_dense(),
        }
    }
}

/// A gradient matrix. The `SparseRidge` variant represents
/// `sparse + point_coeff * X` where `X` is the evaluation point; it shows up
/// when a ridge term is added to a sparse-gradient objective and keeps the
/// gradient-step matrix in sparse-plus-low-rank form.
#[derive(Debug, Clone)]
pub enum Gradient {
    Dense(DenseMatrix),
    Sparse(SparseMatrix),
    SparseRidge { sparse: SparseMatrix, point_coeff: f64 },
}

impl Gradient {
    pub fn to_dense(&self, x: MatrixRef<'_>) -> DenseMatrix {
        match self {
            Gradient::Dense(g) => g.clone(),
            Gradient::Sparse(s) => s.to_dense(),
            Gradient::SparseRidge { sparse, point_coeff } => {
                sparse.to_dense() + x.to_dense() * *point_coeff
            }
        }
    }

    /// Inner product `X . grad` without densifying sparse variants.
    pub fn dot_point(&self, x: MatrixRef<'_>) -> f64 {
        match self {
            Gradient::Dense(g) => match x {
                MatrixRef::Dense(a) => a.dot(g),
                MatrixRef::Factored(f) => f.to_dense().dot(g),
            },
            Gradient::Sparse(s) => s.iter().map(|(i, j, v)| v * x.entry(i, j)).sum(),
            Gradient::SparseRidge { sparse, point_coeff } => {
                let sparse_part: f64 = sparse.iter().map(|(i, j, v)| v * x.entry(i, j)).sum();
                sparse_part + point_coeff * x.fro_norm_sq()
            }
        }
    }

    pub fn fro_norm(&self, x: MatrixRef<'_>) -> f64 {
        match self {
            Gradient::Dense(g) => g.norm(),
            Gradient::Sparse(s) => s.fro_norm(),
            Gradient::SparseRidge { .. } => self.to_dense(x).norm(),
        }
    }

    /// Operator view of the gradient at a factored point (needed only by the
    /// ridge variant, which references the point itself).
    pub fn to_operator(&self, x: &LowRankMatrix) -> GradientOp {
        match self {
            Gradient::Dense(g) => GradientOp::Dense(g.clone()),
            Gradient::Sparse(s) => GradientOp::Sparse(s.clone()),
            Gradient::SparseRidge { sparse, point_coeff } => GradientOp::Combined(
                SparsePlusLowRank::new(x.clone(), *point_coeff, sparse.clone(), 1.0),
            ),
        }
    }

    /// Top `depth` singular values of the gradient, for dual gaps and
    /// spectrum reports. Small gradients go through the exact dense path
    /// (immune to flat spectra); larger ones use the randomized solve and, if
    /// the vector residual stalls on a near-degenerate spectrum, accept the
    /// Ritz values once the residual is below `1e-4 * s_1` (the value error
    /// is quadratic in that residual and the values approach from below).
    pub fn singular_values_head(&self, x: &LowRankMatrix, depth: usize) -> Result<Vec<f64>> {
        use crate::linalg::{full_svd, truncated_svd};
        let (m, n) = (x.rows(), x.cols());
        let depth = depth.clamp(1, m.min(n));
        if m.min(n) <= SPECTRUM_DENSE_DIM {
            let decomp = full_svd(&self.to_dense(MatrixRef::Factored(x)))?;
            return Ok(decomp.values().iter().take(depth).copied().collect());
        }
        let op = self.to_operator(x);
        match truncated_svd(&op, depth, SPECTRUM_SVD_TOL, SPECTRUM_SEED) {
            Ok(decomp) => Ok(decomp.values().iter().copied().collect()),
            Err(CertProjError::SvdNoConvergence {
                values,
                max_residual,
                ..
            }) if max_residual <= 1e-4 * values[0].abs().max(1e-300) => Ok(values),
            Err(e) => Err(e),
        }
    }

    /// Smallest eigenvalue of a symmetric gradient (spectrahedron dual gap).
    pub fn min_eigenvalue_sym(&self, x: &LowRankMatrix) -> Result<f64> {
        use crate::linalg::{symmetric_eigen_dense, truncated_eigen_sym, Negated};
        let n = x.rows();
        if n <= SPECTRUM_DENSE_DIM {
            let dense = self.to_dense(MatrixRef::Factored(x));
            let sym = (&dense + dense.transpose()) * 0.5;
            let eig = symmetric_eigen_dense(&sym)?;
            return Ok(eig.values()[n - 1]);
        }
        let op = self.to_operator(x);
        let neg = Negated(&op);
        match truncated_eigen_sym(&neg, 1, SPECTRUM_SVD_TOL, SPECTRUM_SEED) {
            Ok(decomp) => Ok(-decomp.values()[0]),
            Err(CertProjError::SvdNoConvergence {
                values,
                max_residual,
                ..
            }) if max_residual <= 1e-4 * values[0].abs().max(1e-300) => Ok(-values[0]),
            Err(e) => Err(e),
        }
    }
}

/// Below this minimum dimension, gradient spectra are computed by the exact
/// dense path.
const SPECTRUM_DENSE_DIM: usize = 64;

/// Residual tolerance for the randomized spectral solves on large gradients.
const SPECTRUM_SVD_TOL: f64 = 1e-7;

const SPECTRUM_SEED: u64 = 0x9ead;

pub enum GradientOp {
    Dense(DenseMatrix),
    Sparse(SparseMatrix),
    Combined(SparsePlusLowRank),
}

impl LinOp for GradientOp {
    fn rows(&self) -> usize {
        match self {
            GradientOp::Dense(g) => g.nrows(),
            GradientOp::Sparse(s) => LinOp::rows(s),
            GradientOp::Combined(c) => c.rows(),
        }
    }

    fn cols(&self) -> usize {
        match self {
            GradientOp::Dense(g) => g.ncols(),
            GradientOp::Sparse(s) => LinOp::cols(s),
            GradientOp::Combined(c) => c.cols(),
        }
    }

    fn matvec(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        match self {
            GradientOp::Dense(g) => y.gemv(1.0, g, x, 0.0),
            GradientOp::Sparse(s) => SparseMatrix::matvec(s, x, y),
            GradientOp::Combined(c) => c.matvec(x, y),
        }
    }

    fn rmatvec(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        match self {
            GradientOp::Dense(g) => y.gemv_tr(1.0, g, x, 0.0),
            GradientOp::Sparse(s) => SparseMatrix::rmatvec(s, x, y),
            GradientOp::Combined(c) => c.rmatvec(x, y),
        }
    }
}

/// A smooth convex objective with known smoothness constant and optional
/// strong convexity and stochastic first-order oracle.
pub trait Objective: Sync {
    fn shape(&self) -> (usize, usize);

    fn value(&self, x: MatrixRef<'_>) -> f64;

    fn gradient(&self, x: MatrixRef<'_>) -> Gradient;

    /// Gradient Lipschitz constant (beta).
    fn smoothness(&self) -> f64;

    /// Strong convexity constant (alpha); 0 when none.
    fn strong_convexity(&self) -> f64 {
        0.0
    }

    /// One sample from the stochastic gradient oracle, unbiased for
    /// `gradient(x)`; `None` when the objective has no oracle attached.
    fn sample_gradient(&self, _x: MatrixRef<'_>, _rng: &mut ChaCha8Rng) -> Option<Gradient> {
        None
    }

    /// Frobenius bound G on oracle samples.
    fn stochastic_bound(&self) -> Option<f64> {
        None
    }
}

impl<O: Objective + ?Sized> Objective for Box<O> {
    fn shape(&self) -> (usize, usize) {
        (**self).shape()
    }

    fn value(&self, x: MatrixRef<'_>) -> f64 {
        (**self).value(x)
    }

    fn gradient(&self, x: MatrixRef<'_>) -> Gradient {
        (**self).gradient(x)
    }

    fn smoothness(&self) -> f64 {
        (**self).smoothness()
    }

    fn strong_convexity(&self) -> f64 {
        (**self).strong_convexity()
    }

    fn sample_gradient(&self, x: MatrixRef<'_>, rng: &mut ChaCha8Rng) -> Option<Gradient> {
        (**self).sample_gradient(x, rng)
    }

    fn stochastic_bound(&self) -> Option<f64> {
        (**self).stochastic_bound()
    }
}

/// Packs gradient triplets as sparse when the support is at most 10% of the
/// entries, dense otherwise.
fn pack_gradient(rows: usize, cols: usize, triplets: Vec<(usize, usize, f64)>) -> Gradient {
    if triplets.len() * 10 <= rows * cols {
        Gradient::Sparse(
            SparseMatrix::from_triplets(rows, cols, triplets)
                .expect("gradient triplets are valid by construction"),
        )
    } else {
        let mut g = DenseMatrix::zeros(rows, cols);
        for (i, j, v) in triplets {
            g[(i, j)] = v;
        }
        Gradient::Dense(g)
    }
}

// ---------------------------------------------------------------------------
// Observations and the matrix-completion objective
// ---------------------------------------------------------------------------

/// Observed entries (i, j, value) of a partially known matrix.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl ObservationSet {
    pub fn new(rows: usize, cols: usize, entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(CertProjError::input("observation set: zero dimension"));
        }
        let mut seen = entries.clone();
        seen.sort_unstable_by_key(|&(i, j, _)| (i, j));
        if seen.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(CertProjError::input("observation set: duplicate entry"));
        }
        for &(i, j, v) in &entries {
            if i >= rows || j >= cols {
                return Err(CertProjError::input(format!(
                    "observation set: index ({i}, {j}) out of range for {rows}x{cols}"
                )));
            }
            if !v.is_finite() {
                return Err(CertProjError::input(format!(
                    "observation set: non-finite value at ({i}, {j})"
                )));
            }
        }
        Ok(ObservationSet {
            rows,
            cols,
            entries: seen,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn mean_value(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        self.entries.iter().map(|&(_, _, v)| v).sum::<f64>() / self.entries.len() as f64
    }

    pub fn max_abs_value(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(_, _, v)| v.abs())
            .fold(0.0, f64::max)
    }
}

/// Least-squares matrix completion: `f(X) = sum_{(i,j) in S} (X_ij - r_ij)^2`
/// (note: no 1/2 factor, so `beta = 2` and the mean squared error is
/// `f / |S|`). Gradient evaluation on a factored iterate touches only the
/// observed pattern, costing O(|S| * rank).
pub struct MatrixCompletion {
    obs: ObservationSet,
    stochastic_bound: Option<f64>,
}

/// Builds the completion objective; fails on an empty observation set.
pub fn matrix_completion_objective(obs: ObservationSet) -> Result<MatrixCompletion> {
    if obs.is_empty() {
        return Err(CertProjError::input(
            "matrix completion: empty observation set",
        ));
    }
    Ok(MatrixCompletion {
        obs,
        stochastic_bound: None,
    })
}

impl MatrixCompletion {
    /// Attaches the single-entry stochastic oracle. A query at X samples a
    /// uniform observed entry (i, j) and returns `|S| * 2 (X_ij - r_ij) E_ij`,
    /// which is unbiased for the full gradient. The bound G is computed from
    /// the data range and the supplied iterate norm bound (for iterates in a
    /// trace-norm ball of radius tau, entries are bounded by tau).
    pub fn with_stochastic_oracle(mut self, iterate_norm_bound: f64) -> Self {
        let g = 2.0 * self.obs.len() as f64 * (iterate_norm_bound + self.obs.max_abs_value());
        self.stochastic_bound = Some(g);
        self
    }

    pub fn observations(&self) -> &ObservationSet {
        &self.obs
    }
}

impl Objective for MatrixCompletion {
    fn shape(&self) -> (usize, usize) {
        (self.obs.rows(), self.obs.cols())
    }

    fn value(&self, x: MatrixRef<'_>) -> f64 {
        self.obs
            .entries()
            .iter()
            .map(|&(i, j, r)| {
                let d = x.entry(i, j) - r;
                d * d
            })
            .sum()
    }

    fn gradient(&self, x: MatrixRef<'_>) -> Gradient {
        let triplets: Vec<(usize, usize, f64)> = self
            .obs
            .entries()
            .iter()
            .map(|&(i, j, r)| (i, j, 2.0 * (x.entry(i, j) - r)))
            .collect();
        pack_gradient(self.obs.rows(), self.obs.cols(), triplets)
    }

    fn smoothness(&self) -> f64 {
        2.0
    }

    fn sample_gradient(&self, x: MatrixRef<'_>, rng: &mut ChaCha8Rng) -> Option<Gradient> {
        self.stochastic_bound?;
        let k = rng.random_range(0..self.obs.len());
        let (i, j, r) = self.obs.entries()[k];
        let scale = self.obs.len() as f64 * 2.0 * (x.entry(i, j) - r);
        Some(Gradient::Sparse(
            SparseMatrix::from_triplets(self.obs.rows(), self.obs.cols(), [(i, j, scale)])
                .expect("single observed entry is a valid triplet"),
        ))
    }

    fn stochastic_bound(&self) -> Option<f64> {
        self.stochastic_bound
    }
}

// ---------------------------------------------------------------------------
// Frobenius distance
// ---------------------------------------------------------------------------

/// `f(X) = 1/2 |X - A|_F^2`: 1-smooth and 1-strongly convex.
pub struct FrobeniusDistance {
    target: DenseMatrix,
}

pub fn frobenius_distance_objective(a: DenseMatrix) -> Result<FrobeniusDistance> {
    crate::linalg::validate_dense(&a, "frobenius_distance_objective")?;
    Ok(FrobeniusDistance { target: a })
}

impl FrobeniusDistance {
    pub fn target(&self) -> &DenseMatrix {
        &self.target
    }
}

impl Objective for FrobeniusDistance {
    fn shape(&self) -> (usize, usize) {
        (self.target.nrows(), self.target.ncols())
    }

    fn value(&self, x: MatrixRef<'_>) -> f64 {
        0.5 * (x.to_dense() - &self.target).norm_squared()
    }

    fn gradient(&self, x: MatrixRef<'_>) -> Gradient {
        Gradient::Dense(x.to_dense() - &self.target)
    }

    fn smoothness(&self) -> f64 {
        1.0
    }

    fn strong_convexity(&self) -> f64 {
        1.0
    }
}

// ---------------------------------------------------------------------------
// Diagonal quadratics
// ---------------------------------------------------------------------------

/// One term `1/2 * weight * (scale * X_ii - target)^2` of a diagonal
/// quadratic. Its gradient contribution is
/// `weight * scale * (scale * X_ii - target) * E_ii`.
#[derive(Debug, Clone, Copy)]
pub struct DiagonalTerm {
    pub index: usize,
    pub weight: f64,
    pub scale: f64,
    pub target: f64,
}

impl DiagonalTerm {
    pub fn plain(index: usize, weight: f64, target: f64) -> Self {
        DiagonalTerm {
            index,
            weight,
            scale: 1.0,
            target,
        }
    }
}

/// `f(X) = 1/2 sum_k w_k (c_k * X_{i_k i_k} - t_k)^2` over distinct diagonal
/// slots; the smoothness constant is `max_k w_k c_k^2`.
pub struct DiagonalQuadratic {
    rows: usize,
    cols: usize,
    terms: Vec<DiagonalTerm>,
}

pub fn diagonal_quadratic_objective(
    rows: usize,
    cols: usize,
    terms: Vec<DiagonalTerm>,
) -> Result<DiagonalQuadratic> {
    if terms.is_empty() {
        return Err(CertProjError::input("diagonal quadratic: no terms"));
    }
    let dim = rows.min(cols);
    let mut seen = vec![false; dim];
    for t in &terms {
        if t.index >= dim {
            return Err(CertProjError::input(format!(
                "diagonal quadratic: index {} out of range for min dimension {dim}",
                t.index
            )));
        }
        if seen[t.index] {
            return Err(CertProjError::input(format!(
                "diagonal quadratic: duplicate index {}",
                t.index
            )));
        }
        seen[t.index] = true;
        if t.weight <= 0.0 || !t.weight.is_finite() || !t.scale.is_finite() || t.scale == 0.0 {
            return Err(CertProjError::input(
                "diagonal quadratic: weights must be positive and scales nonzero",
            ));
        }
        if !t.target.is_finite() {
            return Err(CertProjError::input("diagonal quadratic: non-finite target"));
        }
    }
    Ok(DiagonalQuadratic { rows, cols, terms })
}

impl Objective for DiagonalQuadratic {
    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn value(&self, x: MatrixRef<'_>) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let d = t.scale * x.entry(t.index, t.index) - t.target;
                0.5 * t.weight * d * d
            })
            .sum()
    }

    fn gradient(&self, x: MatrixRef<'_>) -> Gradient {
        let triplets: Vec<(usize, usize, f64)> = self
            .terms
            .iter()
            .map(|t| {
                let d = t.scale * x.entry(t.index, t.index) - t.target;
                (t.index, t.index, t.weight * t.scale * d)
            })
            .collect();
        pack_gradient(self.rows, self.cols, triplets)
    }

    fn smoothness(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.weight * t.scale * t.scale)
            .fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Ridge regularization
// ---------------------------------------------------------------------------

/// `f(X) + lambda * |X|_F^2`; adds `2 lambda` to both the smoothness and the
/// strong convexity constants.
pub struct AddRidge<O: Objective> {
    inner: O,
    lambda: f64,
}

pub fn add_ridge<O: Objective>(inner: O, lambda: f64) -> Result<AddRidge<O>> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(CertProjError::input(format!(
            "add_ridge: lambda must be nonnegative and finite, got {lambda}"
        )));
    }
    Ok(AddRidge { inner, lambda })
}

impl<O: Objective> AddRidge<O> {
    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: Objective> Objective for AddRidge<O> {
    fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    fn value(&self, x: MatrixRef<'_>) -> f64 {
        self.inner.value(x) + self.lambda * x.fro_norm_sq()
    }

    fn gradient(&self, x: MatrixRef<'_>) -> Gradient {
        let g = self.inner.gradient(x);
        if self.lambda == 0.0 {
            return g;
        }
        let coeff = 2.0 * self.lambda;
        match g {
            Gradient::Dense(d) => Gradient::Dense(d + x.to_dense() * coeff),
            Gradient::Sparse(sparse) => Gradient::SparseRidge {
                sparse,
                point_coeff: coeff,
            },
            Gradient::SparseRidge {
                sparse,
                point_coeff,
            } => Gradient::SparseRidge {
                sparse,
                point_coeff: point_coeff + coeff,
            },
        }
    }

    fn smoothness(&self) -> f64 {
        self.inner.smoothness() + 2.0 * self.lambda
    }

    fn strong_convexity(&self) -> f64 {
        self.inner.strong_convexity() + 2.0 * self.lambda
    }

    fn sample_gradient(&self, x: MatrixRef<'_>, rng: &mut ChaCha8Rng) -> Option<Gradient> {
        if self.lambda == 0.0 {
            self.inner.sample_gradient(x, rng)
        } else {
            // No bounded oracle once the ridge term is added (the bound would
            // depend on the iterate); treat the oracle as absent.
            None
        }
    }

    fn stochastic_bound(&self) -> Option<f64> {
        if self.lambda == 0.0 {
            self.inner.stochastic_bound()
        } else {
            None
        }
    }
}
