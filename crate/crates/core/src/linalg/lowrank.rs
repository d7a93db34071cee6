//! Factored `U * diag(s) * V^T` representation of iterates.

use crate::error::{CertProjError, Result};
use crate::linalg::DenseMatrix;
use nalgebra::{DMatrix, DVector};

/// Orthonormality tolerance on `U^T U - I` and `V^T V - I` (max norm).
pub const ORTHONORMALITY_TOL: f64 = 1e-8;

/// A matrix held as `U * diag(s) * V^T` with orthonormal factor columns and a
/// nonincreasing, nonnegative spectrum. `k = 0` represents the zero matrix.
#[derive(Debug, Clone)]
pub struct LowRankMatrix {
    u: DMatrix<f64>,
    s: DVector<f64>,
    v: DMatrix<f64>,
}

impl LowRankMatrix {
    /// Validates factor orthonormality and spectrum ordering.
    pub fn new(u: DMatrix<f64>, s: DVector<f64>, v: DMatrix<f64>) -> Result<Self> {
        if u.ncols() != s.len() || v.ncols() != s.len() {
            return Err(CertProjError::input(format!(
                "low-rank factors disagree on rank: U has {} cols, V has {}, s has {}",
                u.ncols(),
                v.ncols(),
                s.len()
            )));
        }
        if s.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(CertProjError::input(
                "low-rank spectrum must be finite and nonnegative",
            ));
        }
        if s.as_slice().windows(2).any(|w| w[0] < w[1]) {
            return Err(CertProjError::input(
                "low-rank spectrum must be nonincreasing",
            ));
        }
        for (name, f) in [("U", &u), ("V", &v)] {
            let gram = f.transpose() * f;
            let mut worst = 0.0_f64;
            for i in 0..gram.nrows() {
                for j in 0..gram.ncols() {
                    let target = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((gram[(i, j)] - target).abs());
                }
            }
            if worst > ORTHONORMALITY_TOL {
                return Err(CertProjError::input(format!(
                    "factor {name} deviates from orthonormality by {worst:.3e}"
                )));
            }
        }
        Ok(LowRankMatrix { u, s, v })
    }

    /// Skips validation; for factors that come straight out of our own
    /// decompositions. Debug builds still check.
    pub(crate) fn from_parts_unchecked(u: DMatrix<f64>, s: DVector<f64>, v: DMatrix<f64>) -> Self {
        debug_assert!(u.ncols() == s.len() && v.ncols() == s.len());
        debug_assert!(s.as_slice().windows(2).all(|w| w[0] >= w[1]));
        LowRankMatrix { u, s, v }
    }

    /// The zero matrix of the given shape (rank zero, empty factors).
    pub fn zeros(rows: usize, cols: usize) -> Self {
        LowRankMatrix {
            u: DMatrix::zeros(rows, 0),
            s: DVector::zeros(0),
            v: DMatrix::zeros(cols, 0),
        }
    }

    /// Rank-one matrix `scale * u v^T` from (not necessarily unit) vectors.
    pub fn rank_one(u: DVector<f64>, v: DVector<f64>, scale: f64) -> Result<Self> {
        let (nu, nv) = (u.norm(), v.norm());
        if nu == 0.0 || nv == 0.0 || scale == 0.0 {
            return Ok(LowRankMatrix::zeros(u.len(), v.len()));
        }
        let weight = scale * nu * nv;
        let (u, v, weight) = if weight < 0.0 {
            (-u / nu, v / nv, -weight)
        } else {
            (u / nu, v / nv, weight)
        };
        LowRankMatrix::new(
            DMatrix::from_columns(&[u]),
            DVector::from_element(1, weight),
            DMatrix::from_columns(&[v]),
        )
    }

    pub fn rows(&self) -> usize {
        self.u.nrows()
    }

    pub fn cols(&self) -> usize {
        self.v.nrows()
    }

    /// Number of stored components (factored rank; zero components are
    /// dropped at construction sites).
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Components with `s_i > rel_tol * s_1`.
    pub fn numerical_rank(&self, rel_tol: f64) -> usize {
        if self.s.is_empty() {
            return 0;
        }
        let cut = rel_tol * self.s[0];
        self.s.iter().filter(|&&x| x > cut).count()
    }

    pub fn left(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.s
    }

    pub fn right(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn trace_norm(&self) -> f64 {
        self.s.sum()
    }

    pub fn fro_norm(&self) -> f64 {
        self.s.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// trace(X) for square shapes; sum of s_i * <u_i, v_i>.
    pub fn trace(&self) -> f64 {
        (0..self.rank())
            .map(|i| self.s[i] * self.u.column(i).dot(&self.v.column(i)))
            .sum()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        (0..self.rank())
            .map(|k| self.s[k] * self.u[(i, k)] * self.v[(j, k)])
            .sum()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DMatrix::zeros(self.rows(), self.cols());
        for k in 0..self.rank() {
            let uk = self.u.column(k);
            let vk = self.v.column(k);
            out.ger(self.s[k], &uk, &vk, 1.0);
        }
        out
    }

    /// y = X x
    pub fn matvec(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        y.fill(0.0);
        if self.rank() == 0 {
            return;
        }
        let mut t = self.v.transpose() * x;
        for k in 0..self.rank() {
            t[k] *= self.s[k];
        }
        y.gemv(1.0, &self.u, &t, 0.0);
    }

    /// y = X^T x
    pub fn rmatvec(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        y.fill(0.0);
        if self.rank() == 0 {
            return;
        }
        let mut t = self.u.transpose() * x;
        for k in 0..self.rank() {
            t[k] *= self.s[k];
        }
        y.gemv(1.0, &self.v, &t, 0.0);
    }

    /// Computes `a * X + b * W` and recompresses to a valid factored form via
    /// QR of the stacked factors and an SVD of the small core. Components
    /// below `1e-13 * s_1` of the combination are dropped.
    pub fn linear_combination(a: f64, x: &LowRankMatrix, b: f64, w: &LowRankMatrix) -> LowRankMatrix {
        assert_eq!(x.rows(), w.rows());
        assert_eq!(x.cols(), w.cols());
        let k1 = x.rank();
        let k2 = w.rank();
        if k1 + k2 == 0 {
            return LowRankMatrix::zeros(x.rows(), x.cols());
        }

        let mut u_cat = DMatrix::zeros(x.rows(), k1 + k2);
        u_cat.view_mut((0, 0), (x.rows(), k1)).copy_from(&x.u);
        u_cat.view_mut((0, k1), (x.rows(), k2)).copy_from(&w.u);
        let mut v_cat = DMatrix::zeros(x.cols(), k1 + k2);
        v_cat.view_mut((0, 0), (x.cols(), k1)).copy_from(&x.v);
        v_cat.view_mut((0, k1), (x.cols(), k2)).copy_from(&w.v);

        let qr_u = u_cat.qr();
        let qr_v = v_cat.qr();
        let mut core = DMatrix::zeros(k1 + k2, k1 + k2);
        for i in 0..k1 {
            core[(i, i)] = a * x.s[i];
        }
        for i in 0..k2 {
            core[(k1 + i, k1 + i)] = b * w.s[i];
        }
        let small = qr_u.r() * core * qr_v.r().transpose();
        let (su, values, sv) = crate::linalg::decomposition::svd_via_augmented(&small);

        let cut = 1e-13 * values.max();
        let keep: Vec<usize> = (0..values.len()).filter(|&i| values[i] > cut).collect();
        if keep.is_empty() {
            return LowRankMatrix::zeros(x.rows(), x.cols());
        }

        let qu = qr_u.q();
        let qv = qr_v.q();
        let mut u = DMatrix::zeros(x.rows(), keep.len());
        let mut v = DMatrix::zeros(x.cols(), keep.len());
        let mut s = DVector::zeros(keep.len());
        for (col, &i) in keep.iter().enumerate() {
            u.column_mut(col).copy_from(&(&qu * su.column(i)));
            v.column_mut(col).copy_from(&(&qv * sv.column(i)));
            s[col] = values[i];
        }
        LowRankMatrix::from_parts_unchecked(u, s, v)
    }

    pub fn scaled(&self, factor: f64) -> LowRankMatrix {
        assert!(factor >= 0.0, "use linear_combination for sign flips");
        let mut out = self.clone();
        out.s *= factor;
        out
    }
}
