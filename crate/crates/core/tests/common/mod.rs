//! Independent oracles for the integration suites. Everything here is coded
//! against the raw matrices, not against the library's decomposition or
//! threshold paths, so agreement is meaningful evidence.

#![allow(dead_code)]
#![allow(clippy::needless_range_loop)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// (eigenvalues sorted nonincreasing, eigenvectors in matching columns).
pub fn jacobi_eigen_sym(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut m = (a + a.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= 1e-14 * m.norm().max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // Rotate rows/columns p and q.
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].partial_cmp(&m[(i, i)]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.column_mut(col).copy_from(&v.column(i));
    }
    (values, vectors)
}

/// Singular values of a rectangular matrix through the Jacobi eigenpath on
/// the smaller Gram matrix.
pub fn jacobi_singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let gram = if a.nrows() <= a.ncols() {
        a * a.transpose()
    } else {
        a.transpose() * a
    };
    let (eigs, _) = jacobi_eigen_sym(&gram);
    eigs.iter().map(|&l| l.max(0.0).sqrt()).collect()
}

/// Full SVD through the Jacobi eigenpath: eigenvectors of A^T A give V, and
/// U comes from A V / sigma (only components with sigma above `rank_tol` are
/// returned).
pub fn jacobi_svd(a: &DMatrix<f64>, rank_tol: f64) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let gram = a.transpose() * a;
    let (eigs, v) = jacobi_eigen_sym(&gram);
    let values: Vec<f64> = eigs.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let keep = values.iter().filter(|&&s| s > rank_tol).count();
    let mut u = DMatrix::zeros(a.nrows(), keep);
    let mut vk = DMatrix::zeros(a.ncols(), keep);
    for i in 0..keep {
        let vi = v.column(i).into_owned();
        let avi = a * &vi;
        u.column_mut(i).copy_from(&(avi / values[i]));
        vk.column_mut(i).copy_from(&vi);
    }
    (u, values[..keep].to_vec(), vk)
}

/// 1-D bisection on `sum(max(0, s_i - sigma)) = tau` over an unsorted signed
/// spectrum.
pub fn bisection_threshold(values: &[f64], tau: f64) -> f64 {
    let top = values.iter().cloned().fold(f64::MIN, f64::max);
    let mut lo = top - tau - values.len() as f64 * values.iter().fold(0.0_f64, |m, v| m.max(v.abs())) - 1.0;
    let mut hi = top;
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        let sum: f64 = values.iter().map(|&x| (x - mid).max(0.0)).sum();
        if sum > tau {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact trace-ball projection through the Jacobi + bisection path.
pub fn oracle_ball_projection(y: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let (u, values, v) = jacobi_svd(y, 1e-13);
    let total: f64 = values.iter().sum();
    if total <= tau {
        return y.clone();
    }
    let sigma = bisection_threshold(&values, tau);
    let mut out = DMatrix::zeros(y.nrows(), y.ncols());
    for i in 0..values.len() {
        let w = (values[i] - sigma).max(0.0);
        if w > 0.0 {
            let ui = u.column(i);
            let vi = v.column(i);
            out.ger(w, &ui, &vi, 1.0);
        }
    }
    out
}

/// Exact spectrahedron projection through the Jacobi + bisection path.
pub fn oracle_spectrahedron_projection(y: &DMatrix<f64>) -> DMatrix<f64> {
    let (values, vectors) = jacobi_eigen_sym(y);
    let lambda = bisection_threshold(&values, 1.0);
    let mut out = DMatrix::zeros(y.nrows(), y.ncols());
    for i in 0..values.len() {
        let w = (values[i] - lambda).max(0.0);
        if w > 0.0 {
            let vi = vectors.column(i);
            out.ger(w, &vi, &vi, 1.0);
        }
    }
    out
}

/// Top singular pair by plain power iteration; deterministic given the seed.
pub fn power_top_pair(m: &DMatrix<f64>, seed: u64) -> (DVector<f64>, DVector<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: DVector<f64> = DVector::from_fn(m.ncols(), |_, _| StandardNormal.sample(&mut rng));
    v /= v.norm();
    for _ in 0..400 {
        let u = m * &v;
        let nu = u.norm();
        if nu <= 1e-300 {
            return (DVector::zeros(m.nrows()), v, 0.0);
        }
        let w = m.transpose() * (u / nu);
        let nw = w.norm();
        if nw <= 1e-300 {
            break;
        }
        v = w / nw;
    }
    let u = m * &v;
    let nu = u.norm();
    (u / nu.max(1e-300), v, nu)
}

/// Frank-Wolfe on `min 1/2 |Z - Y|_F^2` over the trace-norm ball, with exact
/// line search. Returns (best objective seen, final duality-gap bound). The
/// gap bound certifies `best - f* <= gap`, so a candidate projection with a
/// smaller objective and feasible norm is optimal to within `gap`.
pub fn frank_wolfe_certificate(y: &DMatrix<f64>, tau: f64, iters: usize) -> (f64, f64) {
    let mut z = DMatrix::zeros(y.nrows(), y.ncols());
    let mut best = 0.5 * y.norm_squared();
    let mut gap = f64::INFINITY;
    for t in 0..iters {
        let grad = &z - y;
        let (u, v, _) = power_top_pair(&grad, 1000 + t as u64);
        // argmin over the ball of <grad, S> is -tau * (top pair of grad).
        let s = {
            let mut s = DMatrix::zeros(y.nrows(), y.ncols());
            s.ger(-tau, &u, &v, 1.0);
            s
        };
        let direction = &s - &z;
        gap = -grad.dot(&direction);
        let denom = direction.norm_squared();
        if denom <= 1e-300 {
            break;
        }
        let gamma = ((y - &z).dot(&direction) / denom).clamp(0.0, 1.0);
        z += direction * gamma;
        best = best.min(0.5 * (&z - y).norm_squared());
        if gap <= 1e-9 {
            break;
        }
    }
    (best, gap.max(0.0))
}

/// Random matrix with the prescribed singular spectrum.
pub fn matrix_with_spectrum(m: usize, n: usize, spectrum: &[f64], seed: u64) -> DMatrix<f64> {
    let k = spectrum.len().min(m).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gu: DMatrix<f64> = DMatrix::from_fn(m, k, |_, _| StandardNormal.sample(&mut rng));
    let gv: DMatrix<f64> = DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng));
    let qu = gu.qr().q();
    let qv = gv.qr().q();
    let mut out = DMatrix::zeros(m, n);
    for i in 0..k {
        let ui = qu.column(i);
        let vi = qv.column(i);
        out.ger(spectrum[i], &ui, &vi, 1.0);
    }
    out
}

pub fn random_dense(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng))
}

/// Random nonincreasing nonnegative spectrum mixing decay profiles; clusters
/// and near-ties show up regularly.
pub fn random_spectrum(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let profile: u8 = rng.random_range(0..4);
    let mut s: Vec<f64> = (0..len)
        .map(|i| match profile {
            0 => 1.0 / (1.0 + i as f64),                   // slow decay
            1 => 0.5_f64.powi(i as i32),                   // fast decay
            2 => {
                // clustered plateaus
                let plateau = i / 3;
                1.0 / (1.0 + plateau as f64)
            }
            _ => rng.random::<f64>(),                      // rough
        })
        .collect();
    let scale = 0.1 + 4.0 * rng.random::<f64>();
    for x in &mut s {
        *x *= scale;
    }
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}
