//! Abstract linear operators: matvec/rmatvec access without densification.

use crate::linalg::{DenseMatrix, LowRankMatrix, SparseMatrix};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A real linear map with adjoint access. Implementations must be pure so
/// operators can be probed concurrently.
pub trait LinOp: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;

    /// y = A x
    fn matvec(&self, x: &DVector<f64>, y: &mut DVector<f64>);

    /// y = A^T x
    fn rmatvec(&self, x: &DVector<f64>, y: &mut DVector<f64>);

    /// Y = A X, column by column unless an implementation can do better.
    fn matmat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows(), x.ncols());
        let mut col = DVector::zeros(self.rows());
        for j in 0..x.ncols() {
            let xj = DVector::from_column_slice(x.column(j).as_slice());
            self.matvec(&xj, &mut col);
            out.column_mut(j).copy_from(&col);
        }
        out
    }

    /// Y = A^T X
    fn rmatmat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.cols(), x.ncols());
        let mut col = DVector::zeros(self.cols());
        for j in 0..x.ncols() {
            let xj = DVector::from_column_slice(x.column(j).as_slice());
            self.rmatvec(&xj, &mut col);
            out.column_mut(j).copy_from(&col);
        }
        out
    }

    /// Materializes the operator by applying it to the identity. Intended for
    /// exact-projection fallbacks and tests; cost is `cols` matvecs.
    fn to_dense(&self) -> DenseMatrix {
        self.matmat(&DMatrix::identity(self.cols(), self.cols()))
    }
}

/// Dense matrix viewed as an operator.
pub struct DenseOp<'a>(pub &'a DenseMatrix);

impl LinOp for DenseOp<'_> {
    fn rows(&self) -> usize {
        self.0.nrows()
    }

    fn cols(&self) -> usize {
        self.0.ncols()
    }

    fn matvec(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        y.gemv(1.0, self.0, x, 0.0);
    }

    fn rmatvec(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        y.gemv_tr(1.0, self.0, x, 0.0);
    }

    fn matmat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.0 * x
    }

    fn rmatmat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.0.transpose() * x
    }

    fn to_dense(&self) -> DenseMatrix {
        self.0.clone()
    }
}

impl LinOp for SparseMatrix {
    fn rows(&self) -> usize {
        SparseMatrix::rows(self)
    }

    fn cols(&self) -> usize {
        SparseMatrix::cols(self)
    }

    fn matvec(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        SparseMatrix::matvec(self, x, y)
    }

    fn rmatvec(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        SparseMatrix::rmatvec(self, x, y)
    }

    fn to_dense(&self) -> DenseMatrix {
        SparseMatrix::to_dense(self)
    }
}

impl LinOp for LowRankMatrix {
    fn rows(&self) -> usize {
        LowRankMatrix::rows(self)
    }

    fn cols(&self) -> usize {
        LowRankMatrix::cols(self)
    }

    fn matvec(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        LowRankMatrix::matvec(self, x, y)
    }

    fn rmatvec(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        LowRankMatrix::rmatvec(self, x, y)
    }

    fn to_dense(&self) -> DenseMatrix {
        LowRankMatrix::to_dense(self)
    }
}

/// `lr_scale * L + sparse_scale * S` for a factored matrix `L` and a sparse
/// matrix `S`. This is the shape of every gradient-step matrix in matrix
/// completion (`X - eta * grad`) and of the mean-filled warm-start matrix, so
/// it is the workhorse operator for the truncated projections.
pub struct SparsePlusLowRank {
    low_rank: LowRankMatrix,
    lr_scale: f64,
    sparse: SparseMatrix,
    sparse_scale: f64,
}

impl SparsePlusLowRank {
    pub fn new(
        low_rank: LowRankMatrix,
        lr_scale: f64,
        sparse: SparseMatrix,
        sparse_scale: f64,
    ) -> Self {
        assert_eq!(low_rank.rows(), sparse.rows());
        assert_eq!(low_rank.cols(), sparse.cols());
        SparsePlusLowRank {
            low_rank,
            lr_scale,
            sparse,
            sparse_scale,
        }
    }
}

impl LinOp for SparsePlusLowRank {
    fn rows(&self) -> usize {
        self.sparse.rows()
    }

    fn cols(&self) -> usize {
        self.sparse.cols()
    }

    fn matvec(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        let mut tmp = DVector::zeros(self.rows());
        self.low_rank.matvec(x, &mut tmp);
        self.sparse.matvec(x, y);
        y.axpy(self.lr_scale, &tmp, self.sparse_scale);
    }

    fn rmatvec(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        let mut tmp = DVector::zeros(self.cols());
        self.low_rank.rmatvec(x, &mut tmp);
        self.sparse.rmatvec(x, y);
        y.axpy(self.lr_scale, &tmp, self.sparse_scale);
    }

    fn to_dense(&self) -> DenseMatrix {
        self.low_rank.to_dense() * self.lr_scale + self.sparse.to_dense() * self.sparse_scale
    }
}

/// `-A` as an operator.
pub struct Negated<'a>(pub &'a dyn LinOp);

impl LinOp for Negated<'_> {
    fn rows(&self) -> usize {
        self.0.rows()
    }

    fn cols(&self) -> usize {
        self.0.cols()
    }

    fn matvec(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        self.0.matvec(x, y);
        y.neg_mut();
    }

    fn rmatvec(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        self.0.rmatvec(x, y);
        y.neg_mut();
    }
}

/// Samples `probes` random unit vector pairs and returns the worst relative
/// adjoint mismatch `|<A v, u> - <v, A^T u>| / (|A v| |u|)`.
pub fn check_adjoint_consistency(op: &dyn LinOp, probes: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..probes {
        let v = random_unit(&mut rng, op.cols());
        let u = random_unit(&mut rng, op.rows());
        let mut av = DVector::zeros(op.rows());
        op.matvec(&v, &mut av);
        let mut atu = DVector::zeros(op.cols());
        op.rmatvec(&u, &mut atu);
        let lhs = av.dot(&u);
        let rhs = v.dot(&atu);
        let scale = av.norm().max(1e-300);
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    worst
}

fn random_unit(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    let mut v = DVector::from_fn(len, |_, _| rng.random::<f64>() - 0.5);
    let n = v.norm();
    if n > 0.0 {
        v /= n;
    } else {
        v[0] = 1.0;
    }
    v
}
