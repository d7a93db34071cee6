//! Truncated spectral solves over abstract operators: randomized subspace
//! iteration with oversampling and adaptive power steps. A Lanczos backend
//! would slot in behind the same signatures.

use crate::error::{CertProjError, Result};
use crate::linalg::decomposition::{canonicalize_signs, DecompositionKind, SpectralDecomposition};
use crate::linalg::LinOp;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Extra subspace dimensions beyond the requested rank.
const OVERSAMPLING: usize = 5;

/// Power-iteration cap; exceeding it is a convergence error.
const MAX_POWER_ITERATIONS: usize = 300;

/// Top-r singular triplets of an arbitrary operator.
///
/// Runs randomized subspace iteration with a seeded Gaussian test block
/// (counter-mode ChaCha stream, so runs are reproducible) and stops once every
/// requested triplet satisfies `|A v_i - s_i u_i| <= tol * s_1`.
pub fn truncated_svd(
    a: &dyn LinOp,
    r: usize,
    tol: f64,
    seed: u64,
) -> Result<SpectralDecomposition> {
    let (m, n) = (a.rows(), a.cols());
    let dim = m.min(n);
    if r == 0 || r > dim {
        return Err(CertProjError::input(format!(
            "truncated_svd: rank {r} out of range for a {m}x{n} operator"
        )));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(CertProjError::input("truncated_svd: tol must be positive"));
    }

    let block = (r + OVERSAMPLING).min(dim);
    let omega = gaussian_block(n, block, seed);
    let mut q = thin_q(a.matmat(&omega));

    let mut best: Option<(DVector<f64>, Vec<f64>)> = None;
    for iteration in 0..MAX_POWER_ITERATIONS {
        if iteration > 0 {
            // One power step: Q <- orth(A * orth(A^T Q)).
            let w = thin_q(a.rmatmat(&q));
            q = thin_q(a.matmat(&w));
        }

        // Rayleigh-Ritz through the small factor Z = A^T Q = V * S * W^T,
        // which makes A^T U = V S exact and leaves |A v_i - s_i u_i| as the
        // only residual to monitor. Z is factored as QR plus a robust SVD of
        // the small triangle, which keeps tied Ritz values accurate.
        let z = a.rmatmat(&q);
        let z_qr = z.qr();
        let (p, values_full, w) =
            crate::linalg::decomposition::svd_via_augmented(&z_qr.r());
        let v_full = z_qr.q() * &p;

        let s1 = values_full.max();
        if s1 <= 1e-300 {
            // Zero (or numerically zero) operator: canonical zero triplets.
            return Ok(zero_decomposition(m, n, r, DecompositionKind::Singular));
        }

        let u_full = &q * w;
        let u = u_full.columns(0, r).into_owned();
        let v = v_full.columns(0, r).into_owned();
        let values = values_full.rows(0, r).into_owned();

        let av = a.matmat(&v);
        let mut residuals = Vec::with_capacity(r);
        for i in 0..r {
            let res = (av.column(i) - u.column(i) * values[i]).norm();
            residuals.push(res);
        }
        let worst = residuals.iter().cloned().fold(0.0, f64::max);
        if worst <= tol * s1 {
            let (mut u, mut v) = (u, v);
            canonicalize_signs(&mut u, &mut v);
            return Ok(SpectralDecomposition::new(
                u,
                v,
                values,
                DecompositionKind::Singular,
                r,
                residuals,
            ));
        }
        best = Some((values, residuals));
    }

    let (values, residuals) = best.expect("at least one Ritz extraction");
    Err(CertProjError::SvdNoConvergence {
        iterations: MAX_POWER_ITERATIONS,
        max_residual: residuals.iter().cloned().fold(0.0, f64::max),
        values: values.iter().copied().collect(),
        residuals,
    })
}

/// Top-r algebraically largest eigenpairs of a symmetric operator.
///
/// The subspace iteration runs on `A + c I` with `c` a safe spectral-norm
/// overestimate, so negative spectrum cannot outrun the wanted (signed) top;
/// Ritz values are extracted from the unshifted operator.
pub fn truncated_eigen_sym(
    a: &dyn LinOp,
    r: usize,
    tol: f64,
    seed: u64,
) -> Result<SpectralDecomposition> {
    let n = a.rows();
    if a.cols() != n {
        return Err(CertProjError::input(format!(
            "truncated_eigen_sym: operator is {}x{}, expected square",
            a.rows(),
            a.cols()
        )));
    }
    if r == 0 || r > n {
        return Err(CertProjError::input(format!(
            "truncated_eigen_sym: rank {r} out of range for dimension {n}"
        )));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(CertProjError::input(
            "truncated_eigen_sym: tol must be positive",
        ));
    }

    let norm_est = spectral_norm_estimate(a, seed ^ 0x5eed);
    if norm_est <= 1e-300 {
        return Ok(zero_decomposition(n, n, r, DecompositionKind::SymmetricEigen));
    }
    let shift = 1.5 * norm_est + 1e-12;

    let block = (r + OVERSAMPLING).min(n);
    let omega = gaussian_block(n, block, seed);
    let mut q = thin_q(a.matmat(&omega) + &omega * shift);

    let mut best: Option<(DVector<f64>, Vec<f64>)> = None;
    for iteration in 0..MAX_POWER_ITERATIONS {
        if iteration > 0 {
            q = thin_q(a.matmat(&q) + &q * shift);
        }

        let aq = a.matmat(&q);
        let small = {
            let b = q.transpose() * &aq;
            (&b + b.transpose()) * 0.5
        };
        let eig = crate::linalg::decomposition::robust_symmetric_eigen(small);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

        let mut vectors = DMatrix::zeros(n, r);
        let mut values = DVector::zeros(r);
        for (col, &i) in order.iter().take(r).enumerate() {
            vectors
                .column_mut(col)
                .copy_from(&(&q * eig.eigenvectors.column(i)));
            values[col] = eig.eigenvalues[i];
        }

        let scale = values.iter().fold(norm_est, |m, &x| m.max(x.abs()));
        let avec = a.matmat(&vectors);
        let mut residuals = Vec::with_capacity(r);
        for i in 0..r {
            residuals.push((avec.column(i) - vectors.column(i) * values[i]).norm());
        }
        let worst = residuals.iter().cloned().fold(0.0, f64::max);
        if worst <= tol * scale {
            let mut u = vectors;
            let mut v = u.clone();
            canonicalize_signs(&mut u, &mut v);
            let v = u.clone();
            return Ok(SpectralDecomposition::new(
                u,
                v,
                values,
                DecompositionKind::SymmetricEigen,
                r,
                residuals,
            ));
        }
        best = Some((values, residuals));
    }

    let (values, residuals) = best.expect("at least one Ritz extraction");
    Err(CertProjError::SvdNoConvergence {
        iterations: MAX_POWER_ITERATIONS,
        max_residual: residuals.iter().cloned().fold(0.0, f64::max),
        values: values.iter().copied().collect(),
        residuals,
    })
}

fn gaussian_block(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

fn thin_q(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

/// Crude operator-norm estimate by a short power iteration on A^T A; the
/// returned value converges to the top singular value from below.
fn spectral_norm_estimate(a: &dyn LinOp, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DVector::from_fn(a.cols(), |_, _| {
        let g: f64 = StandardNormal.sample(&mut rng);
        g
    });
    let nx = x.norm();
    if nx == 0.0 {
        return 0.0;
    }
    x /= nx;
    let mut y = DVector::zeros(a.rows());
    let mut xt = DVector::zeros(a.cols());
    let mut estimate = 0.0;
    for _ in 0..30 {
        a.matvec(&x, &mut y);
        let ny = y.norm();
        if ny <= 1e-300 {
            return estimate;
        }
        estimate = ny;
        a.rmatvec(&y, &mut xt);
        let nxt = xt.norm();
        if nxt <= 1e-300 {
            return estimate;
        }
        x.copy_from(&xt);
        x /= nxt;
    }
    estimate
}

fn zero_decomposition(
    m: usize,
    n: usize,
    r: usize,
    kind: DecompositionKind,
) -> SpectralDecomposition {
    let u = DMatrix::identity(m, r);
    let v = DMatrix::identity(n, r);
    SpectralDecomposition::new(u, v, DVector::zeros(r), kind, r, vec![0.0; r])
}
