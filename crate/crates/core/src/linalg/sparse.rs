//! Minimal CSR sparse matrix; enough for gradients supported on an
//! observation pattern and for sparse-plus-low-rank operators.

use crate::error::{CertProjError, Result};
use crate::linalg::DenseMatrix;
use nalgebra::DVector;

#[derive(Debug, Clone)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    // CSR
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from COO triplets. Rejects out-of-range indices, duplicate
    /// (row, col) pairs and non-finite values.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(CertProjError::input("sparse matrix: zero dimension"));
        }
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(i, j, v) in &entries {
            if i >= rows || j >= cols {
                return Err(CertProjError::input(format!(
                    "sparse matrix: index ({i}, {j}) out of range for {rows}x{cols}"
                )));
            }
            if !v.is_finite() {
                return Err(CertProjError::input(format!(
                    "sparse matrix: non-finite value at ({i}, {j})"
                )));
            }
        }
        entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        if entries.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(CertProjError::input(
                "sparse matrix: duplicate (row, col) pair",
            ));
        }

        let mut row_ptr = vec![0usize; rows + 1];
        for &(i, _, _) in &entries {
            row_ptr[i + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = entries.iter().map(|&(_, j, _)| j).collect();
        let values = entries.iter().map(|&(_, _, v)| v).collect();
        Ok(SparseMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(move |k| (i, self.col_idx[k], self.values[k]))
        })
    }

    pub fn scaled(&self, factor: f64) -> SparseMatrix {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= factor;
        }
        out
    }

    /// y = A x
    pub fn matvec(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for i in 0..self.rows {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    /// y = A^T x
    pub fn rmatvec(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        y.fill(0.0);
        for i in 0..self.rows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[k]] += self.values[k] * xi;
            }
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.iter() {
            out[(i, j)] = v;
        }
        out
    }

    pub fn fro_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_triplets() {
        assert!(SparseMatrix::from_triplets(2, 2, [(2, 0, 1.0)]).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, [(0, 0, f64::NAN)]).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, [(0, 0, 1.0), (0, 0, 2.0)]).is_err());
    }

    #[test]
    fn matvec_matches_dense() {
        let sp = SparseMatrix::from_triplets(3, 4, [(0, 1, 2.0), (2, 3, -1.5), (1, 0, 0.5)]).unwrap();
        let dense = sp.to_dense();
        let x = DVector::from_vec(vec![1.0, -2.0, 3.0, 0.5]);
        let mut y = DVector::zeros(3);
        sp.matvec(&x, &mut y);
        assert!((&dense * &x - &y).norm() < 1e-14);

        let z = DVector::from_vec(vec![0.3, 0.7, -0.1]);
        let mut w = DVector::zeros(4);
        sp.rmatvec(&z, &mut w);
        assert!((dense.transpose() * &z - &w).norm() < 1e-14);
    }
}
