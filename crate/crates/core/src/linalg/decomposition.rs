//! Spectral decompositions: the shared result carrier and the dense exact
//! paths (full SVD, symmetric eigendecomposition).

use crate::error::{CertProjError, Result};
use crate::linalg::{validate_dense, validate_symmetric, DenseMatrix};
use nalgebra::{DMatrix, DVector};

/// Exact dense decompositions are only offered up to this minimum dimension;
/// anything larger must go through the operator-based truncated paths so the
/// cost of exact projections stays visible.
pub const FULL_SVD_DIM_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecompositionKind {
    /// Singular triplets; values are nonnegative.
    Singular,
    /// Eigenpairs of a symmetric matrix; values may be negative. `U == V`.
    SymmetricEigen,
}

/// Ordered spectral triplets with rank bookkeeping; the carrier for every
/// SVD / eigendecomposition result in the crate.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    values: DVector<f64>,
    kind: DecompositionKind,
    requested_rank: usize,
    residuals: Vec<f64>,
}

impl SpectralDecomposition {
    pub(crate) fn new(
        u: DMatrix<f64>,
        v: DMatrix<f64>,
        values: DVector<f64>,
        kind: DecompositionKind,
        requested_rank: usize,
        residuals: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(u.ncols(), values.len());
        debug_assert_eq!(v.ncols(), values.len());
        debug_assert!(values.as_slice().windows(2).all(|w| w[0] >= w[1]));
        SpectralDecomposition {
            u,
            v,
            values,
            kind,
            requested_rank,
            residuals,
        }
    }

    pub fn kind(&self) -> DecompositionKind {
        self.kind
    }

    /// Values sorted nonincreasing (nonnegative for the singular kind).
    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn left(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn right(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn requested_rank(&self) -> usize {
        self.requested_rank
    }

    /// Per-value residual estimates `|A v_i - value_i u_i|`; zero for exact
    /// dense decompositions.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// The i-th value, or 0 past the end of the computed spectrum (the tail
    /// of a spectrum truncated at full rank is exactly zero for the singular
    /// kind; callers on the eigen path must not rely on this default).
    pub fn value_or_zero(&self, i: usize) -> f64 {
        if i < self.values.len() {
            self.values[i]
        } else {
            0.0
        }
    }

    /// True when the cut between positions `rank` and `rank + 1` falls inside
    /// a value cluster at relative tolerance `rel_tol`, i.e. the retained and
    /// first discarded values are numerically tied.
    pub fn degenerate_cut(&self, rank: usize, rel_tol: f64) -> bool {
        if rank == 0 || rank >= self.values.len() {
            return false;
        }
        let scale = self.values[0].abs().max(1.0);
        (self.values[rank - 1] - self.values[rank]).abs() < rel_tol * scale
    }

    /// Keeps the leading `k` triplets.
    pub fn truncate(mut self, k: usize) -> Self {
        if k >= self.values.len() {
            return self;
        }
        self.u = self.u.columns(0, k).into_owned();
        self.v = self.v.columns(0, k).into_owned();
        self.values = self.values.rows(0, k).into_owned();
        self.residuals.truncate(k);
        self
    }
}

/// Fixes the sign ambiguity of each singular / eigen pair: the first entry of
/// `u_i` with magnitude above 1e-12 is made positive, flipping `v_i` along
/// with it. Matrix-level comparisons do not need this; factor-level tests do.
pub(crate) fn canonicalize_signs(u: &mut DMatrix<f64>, v: &mut DMatrix<f64>) {
    for k in 0..u.ncols() {
        let flip = u
            .column(k)
            .iter()
            .find(|x| x.abs() > 1e-12)
            .is_some_and(|&x| x < 0.0);
        if flip {
            u.column_mut(k).neg_mut();
            v.column_mut(k).neg_mut();
        }
    }
}

/// Entries below this relative level are flushed to zero before symmetric
/// eigendecompositions: they sit far under any representable effect on the
/// spectrum (perturbation <= n * 1e-40 * |A| << eps * |A|), and huge dynamic
/// ranges destabilize the tridiagonal iteration.
const EIGEN_FLUSH_REL: f64 = 1e-40;

pub(crate) fn robust_symmetric_eigen(
    mut a: DMatrix<f64>,
) -> nalgebra::SymmetricEigen<f64, nalgebra::Dyn> {
    let scale = a.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
    if scale > 0.0 {
        let cut = EIGEN_FLUSH_REL * scale;
        for x in a.iter_mut() {
            if x.abs() < cut {
                *x = 0.0;
            }
        }
    }
    a.symmetric_eigen()
}

/// SVD of a dense matrix through the eigendecomposition of the symmetric
/// augmented matrix `[[0, A], [A^T, 0]]`, whose eigenpairs `(s_i, (u_i; v_i))`
/// carry the singular triplets without squaring the condition number. This
/// route stays accurate on clustered and tied spectra, which the projection
/// certificates depend on. Factors for the numerically zero part of the
/// spectrum are completed to orthonormal blocks.
pub(crate) fn svd_via_augmented(
    a: &DenseMatrix,
) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let (m, n) = (a.nrows(), a.ncols());
    let dim = m.min(n);
    let mut aug = DMatrix::<f64>::zeros(m + n, m + n);
    aug.view_mut((0, m), (m, n)).copy_from(a);
    aug.view_mut((m, 0), (n, m)).copy_from(&a.transpose());
    let eig = robust_symmetric_eigen(aug);

    let mut order: Vec<usize> = (0..m + n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let sigma1 = eig.eigenvalues[order[0]].max(0.0);
    let cutoff = 1e-13 * sigma1;

    let mut u = DMatrix::zeros(m, dim);
    let mut v = DMatrix::zeros(n, dim);
    let mut values = DVector::zeros(dim);
    let mut kept = 0usize;
    for &idx in order.iter().take(dim) {
        let lambda = eig.eigenvalues[idx];
        if lambda <= cutoff {
            break;
        }
        let w = eig.eigenvectors.column(idx);
        let wu = w.rows(0, m).into_owned();
        let wv = w.rows(m, n).into_owned();
        let (nu, nv) = (wu.norm(), wv.norm());
        // A positive eigenvalue has both halves near 1/sqrt(2).
        if nu < 0.5 || nv < 0.5 {
            continue;
        }
        u.column_mut(kept).copy_from(&(wu / nu));
        v.column_mut(kept).copy_from(&(wv / nv));
        values[kept] = lambda;
        kept += 1;
    }
    // Orthonormal completion for the zero part of the spectrum.
    complete_orthonormal(&mut u, kept);
    complete_orthonormal(&mut v, kept);
    (u, values, v)
}

/// Extends the first `kept` orthonormal columns of `block` to fill all its
/// columns, by Gram-Schmidt over canonical basis vectors.
fn complete_orthonormal(block: &mut DMatrix<f64>, kept: usize) {
    let rows = block.nrows();
    let total = block.ncols();
    let mut filled = kept;
    for idx in 0..rows {
        if filled == total {
            return;
        }
        let mut cand = DVector::zeros(rows);
        cand[idx] = 1.0;
        for _ in 0..2 {
            for c in 0..filled {
                let d = block.column(c).dot(&cand);
                cand.axpy(-d, &block.column(c).into_owned(), 1.0);
            }
        }
        let norm = cand.norm();
        if norm > 1e-8 {
            block.column_mut(filled).copy_from(&(cand / norm));
            filled += 1;
        }
    }
    assert_eq!(filled, total, "orthonormal completion ran out of directions");
}

/// Complete SVD of a small dense matrix, values sorted nonincreasing.
pub fn full_svd(a: &DenseMatrix) -> Result<SpectralDecomposition> {
    validate_dense(a, "full_svd")?;
    if a.nrows().min(a.ncols()) > FULL_SVD_DIM_LIMIT {
        return Err(CertProjError::input(format!(
            "full_svd: min dimension {} exceeds the dense limit {FULL_SVD_DIM_LIMIT}; \
             use the operator-based truncated path",
            a.nrows().min(a.ncols())
        )));
    }
    let (mut u, values, mut v) = svd_via_augmented(a);
    canonicalize_signs(&mut u, &mut v);
    let k = values.len();
    Ok(SpectralDecomposition::new(
        u,
        v,
        values,
        DecompositionKind::Singular,
        k,
        vec![0.0; k],
    ))
}

/// Full eigendecomposition of a symmetric dense matrix, eigenvalues sorted
/// nonincreasing (signed). The matrix is symmetrized before factorization.
pub fn symmetric_eigen_dense(a: &DenseMatrix) -> Result<SpectralDecomposition> {
    validate_symmetric(a, 1e-12, "symmetric_eigen_dense")?;
    let sym = (a + a.transpose()) * 0.5;
    let eig = robust_symmetric_eigen(sym);
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let mut v = DMatrix::zeros(n, n);
    let mut values = DVector::zeros(n);
    for (col, &i) in order.iter().enumerate() {
        v.column_mut(col).copy_from(&eig.eigenvectors.column(i));
        values[col] = eig.eigenvalues[i];
    }
    let mut u = v.clone();
    canonicalize_signs(&mut u, &mut v);
    // For the eigen kind both blocks hold the same eigenvectors.
    let v = u.clone();
    Ok(SpectralDecomposition::new(
        u,
        v,
        values,
        DecompositionKind::SymmetricEigen,
        n,
        vec![0.0; n],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(d: &SpectralDecomposition) -> DenseMatrix {
        d.left() * DMatrix::from_diagonal(d.values()) * d.right().transpose()
    }

    #[test]
    fn diagonal_matrix_spectrum_is_sorted() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let d = full_svd(&a).unwrap();
        let vals: Vec<f64> = d.values().iter().copied().collect();
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 2.0).abs() < 1e-12);
        assert!((vals[2] - 1.0).abs() < 1e-12);
        // Axis-aligned vectors up to ordering.
        for k in 0..3 {
            let col = d.left().column(k);
            let mx = col.iter().map(|x| x.abs()).fold(0.0_f64, f64::max);
            assert!((mx - 1.0).abs() < 1e-10);
        }
        assert!((reconstruct(&d) - a).norm() < 1e-12);
    }

    #[test]
    fn zero_matrix_has_zero_values() {
        let a = DMatrix::zeros(2, 3);
        let d = full_svd(&a).unwrap();
        assert_eq!(d.values().len(), 2);
        assert!(d.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_non_finite_input() {
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = f64::INFINITY;
        assert!(full_svd(&a).is_err());
    }

    #[test]
    fn symmetric_eigen_sorts_signed_values() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 2.0, 0.5]));
        let d = symmetric_eigen_dense(&a).unwrap();
        let vals: Vec<f64> = d.values().iter().copied().collect();
        assert!((vals[0] - 2.0).abs() < 1e-12);
        assert!((vals[1] - 0.5).abs() < 1e-12);
        assert!((vals[2] + 1.0).abs() < 1e-12);
        assert!((reconstruct(&d) - a).norm() < 1e-12);
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = 1.0;
        assert!(symmetric_eigen_dense(&a).is_err());
    }
}
