//! Exact and rank-r truncated (certified) projections onto the trace-norm
//! ball and the spectrahedron, plus singular-value soft-thresholding.
//!
//! A truncated projection computes the top r+1 spectral components and checks
//! the head-sum certificate (`sum_{i<=r} s_i >= tau + r * s_{r+1}` for the
//! ball, the eigenvalue analogue for the spectrahedron, `s_{r+1} < eta` for
//! soft-thresholding). When the certificate holds, clipping the top-r part is
//! provably the exact projection and the result is marked `certified`.

use crate::error::{CertProjError, Result};
use crate::linalg::{
    full_svd, simplex_threshold, simplex_threshold_signed, symmetric_eigen_dense,
    truncated_eigen_sym, truncated_svd, validate_dense, validate_symmetric, DenseMatrix, LinOp,
    LowRankMatrix, SpectralDecomposition,
};
use nalgebra::{DMatrix, DVector};

/// Absolute slack on the rank certificate; chosen so the truncated-SVD
/// residual tolerance cannot flip a true certificate. A marginal true
/// certificate may fail (and escalate); a false pass is bounded by the SVD
/// tolerance. See `TRUNCATED_TOL`.
pub const CERTIFICATE_SLACK: f64 = 1e-10;

/// Slack on the soft-threshold tail test `s_{r+1} < eta`.
pub const SOFT_THRESHOLD_SLACK: f64 = 1e-12;

/// Clipped components at or below this value are dropped from factored results.
pub const COMPONENT_DROP_TOL: f64 = 1e-14;

/// Residual tolerance handed to the truncated spectral solves.
pub const TRUNCATED_TOL: f64 = 1e-11;

/// Relative level at which a computed tail value is treated as exactly zero
/// (the operator is numerically rank-deficient at the cut).
const ZERO_TAIL_REL: f64 = 1e-12;

/// Seed for the internal randomized spectral solves. Projections take no seed
/// parameter; a fixed stream keeps them pure functions of their inputs.
const INTERNAL_SEED: u64 = 0x51_0ce7;

/// What to do when the rank-r certificate fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EscalationPolicy {
    /// Surface a `CertificateFailed` error.
    Error,
    /// Retry with doubled rank up to `cap` (a cap of `min(m, n)` always
    /// terminates, since the full-rank attempt cannot fail).
    EscalateDoubling { cap: usize },
    /// Densify the operator and take the exact projection.
    FallbackExact,
}

impl EscalationPolicy {
    /// Doubling escalation capped at the full dimension.
    pub fn escalate_to_full() -> Self {
        EscalationPolicy::EscalateDoubling { cap: usize::MAX }
    }
}

/// A projected matrix in factored form together with the evidence that it
/// equals the exact projection.
#[derive(Debug, Clone)]
pub struct CertifiedProjection {
    /// The projected matrix.
    pub result: LowRankMatrix,
    /// The spectrum shift that produced the result (0 for identity cases; the
    /// shrinkage amount for soft-thresholding).
    pub threshold: f64,
    /// True when the result provably equals the exact projection.
    pub certified: bool,
    /// Number of nonzero components in the result.
    pub rank_used: usize,
    /// Size of the spectral solve that produced the result (r+1 for a
    /// first-try certified truncation; larger after escalation; the full
    /// dimension for exact paths).
    pub svd_rank_computed: usize,
}

fn build_result(
    decomp: &SpectralDecomposition,
    clipped: &[f64],
) -> (LowRankMatrix, usize) {
    let keep: Vec<usize> = (0..clipped.len())
        .filter(|&i| clipped[i] > COMPONENT_DROP_TOL)
        .collect();
    if keep.is_empty() {
        return (
            LowRankMatrix::zeros(decomp.left().nrows(), decomp.right().nrows()),
            0,
        );
    }
    let mut u = DMatrix::zeros(decomp.left().nrows(), keep.len());
    let mut v = DMatrix::zeros(decomp.right().nrows(), keep.len());
    let mut s = DVector::zeros(keep.len());
    for (col, &i) in keep.iter().enumerate() {
        u.column_mut(col).copy_from(&decomp.left().column(i));
        v.column_mut(col).copy_from(&decomp.right().column(i));
        s[col] = clipped[i];
    }
    let rank = keep.len();
    (LowRankMatrix::from_parts_unchecked(u, s, v), rank)
}

// ---------------------------------------------------------------------------
// Trace-norm ball
// ---------------------------------------------------------------------------

/// Exact Euclidean projection onto the trace-norm ball of radius `tau`,
/// via a full SVD. Always certified.
pub fn project_trace_ball_exact(y: &DenseMatrix, tau: f64) -> Result<CertifiedProjection> {
    validate_dense(y, "project_trace_ball_exact")?;
    require_positive(tau, "tau")?;
    let decomp = full_svd(y)?;
    let dim = decomp.values().len();
    let values: Vec<f64> = decomp.values().iter().copied().collect();
    let trace_norm: f64 = values.iter().sum();
    if trace_norm <= tau {
        let (result, rank_used) = build_result(&decomp, &values);
        return Ok(CertifiedProjection {
            result,
            threshold: 0.0,
            certified: true,
            rank_used,
            svd_rank_computed: dim,
        });
    }
    let (clipped, sigma) = simplex_threshold(&values, tau)?;
    let (result, rank_used) = build_result(&decomp, &clipped);
    Ok(CertifiedProjection {
        result,
        threshold: sigma,
        certified: true,
        rank_used,
        svd_rank_computed: dim,
    })
}

/// Certified rank-r truncated projection onto the trace-norm ball.
///
/// Computes r+1 singular triplets (the certificate references the (r+1)-th
/// value, so each attempt costs one extra triplet) and clips the head when
/// the certificate holds; otherwise applies the escalation policy.
pub fn project_trace_ball_truncated(
    y: &dyn LinOp,
    tau: f64,
    r: usize,
    policy: EscalationPolicy,
) -> Result<CertifiedProjection> {
    require_positive(tau, "tau")?;
    let dim = y.rows().min(y.cols());
    validate_rank(r, dim)?;

    let mut rank = r;
    loop {
        match attempt_ball(y, tau, rank, dim)? {
            Attempt::Done(p) => return Ok(p),
            Attempt::CertificateFailed {
                head_sum,
                next_value,
                values,
            } => match next_rank(rank, dim, policy) {
                Escalation::Retry(next) => rank = next,
                Escalation::Fail => {
                    return Err(CertProjError::CertificateFailed {
                        rank,
                        head_sum,
                        next_value,
                        target: tau,
                        values,
                    })
                }
                Escalation::Exact => return project_trace_ball_exact(&y.to_dense(), tau),
            },
        }
    }
}

enum Attempt {
    Done(CertifiedProjection),
    CertificateFailed {
        head_sum: f64,
        next_value: f64,
        values: Vec<f64>,
    },
}

fn attempt_ball(y: &dyn LinOp, tau: f64, r: usize, dim: usize) -> Result<Attempt> {
    if r >= dim {
        // Full decomposition through the operator path: the tail is empty, so
        // this is the exact projection.
        let decomp = truncated_svd(y, dim, TRUNCATED_TOL, INTERNAL_SEED)?;
        let values: Vec<f64> = decomp.values().iter().copied().collect();
        let trace_norm: f64 = values.iter().sum();
        let (clipped, sigma) = if trace_norm <= tau {
            (values, 0.0)
        } else {
            simplex_threshold(&values, tau)?
        };
        let (result, rank_used) = build_result(&decomp, &clipped);
        return Ok(Attempt::Done(CertifiedProjection {
            result,
            threshold: sigma,
            certified: true,
            rank_used,
            svd_rank_computed: dim,
        }));
    }

    let decomp = truncated_svd(y, r + 1, TRUNCATED_TOL, INTERNAL_SEED)?;
    let values: Vec<f64> = decomp.values().iter().copied().collect();
    let head_sum: f64 = values[..r].iter().sum();
    let tail = values[r];
    let s1 = values[0];

    // Interior short-circuit: a numerically zero tail proves rank(Y) <= r, so
    // head_sum is the whole trace norm; inside the ball the projection is the
    // identity.
    if tail <= ZERO_TAIL_REL * s1.max(1.0) && head_sum <= tau + CERTIFICATE_SLACK {
        let (result, rank_used) = build_result(&decomp.truncate(r), &values[..r]);
        return Ok(Attempt::Done(CertifiedProjection {
            result,
            threshold: 0.0,
            certified: true,
            rank_used,
            svd_rank_computed: r + 1,
        }));
    }

    if head_sum >= tau + (r as f64) * tail - CERTIFICATE_SLACK {
        // Certificate holds: the exact threshold is at least the tail value,
        // so solving over the head alone reproduces the exact projection.
        let head = &values[..r];
        let (clipped, sigma) = if head.iter().sum::<f64>() <= tau {
            (head.to_vec(), 0.0)
        } else {
            simplex_threshold(head, tau)?
        };
        let (result, rank_used) = build_result(&decomp.truncate(r), &clipped);
        return Ok(Attempt::Done(CertifiedProjection {
            result,
            threshold: sigma,
            certified: true,
            rank_used,
            svd_rank_computed: r + 1,
        }));
    }

    Ok(Attempt::CertificateFailed {
        head_sum,
        next_value: tail,
        values,
    })
}

// ---------------------------------------------------------------------------
// Soft-thresholding (trace-norm regularization)
// ---------------------------------------------------------------------------

/// Exact singular-value soft-thresholding `max(s_i - eta, 0)` via full SVD.
pub fn soft_threshold_exact(y: &DenseMatrix, eta: f64) -> Result<CertifiedProjection> {
    validate_dense(y, "soft_threshold_exact")?;
    require_positive(eta, "eta")?;
    let decomp = full_svd(y)?;
    let dim = decomp.values().len();
    let clipped: Vec<f64> = decomp.values().iter().map(|&s| (s - eta).max(0.0)).collect();
    let (result, rank_used) = build_result(&decomp, &clipped);
    Ok(CertifiedProjection {
        result,
        threshold: eta,
        certified: true,
        rank_used,
        svd_rank_computed: dim,
    })
}

/// Certified rank-r soft-thresholding: if the computed `s_{r+1}` is below
/// `eta`, every discarded component would have shrunk to zero anyway and the
/// truncated result is exact.
pub fn soft_threshold(
    y: &dyn LinOp,
    eta: f64,
    r: usize,
    policy: EscalationPolicy,
) -> Result<CertifiedProjection> {
    require_positive(eta, "eta")?;
    let dim = y.rows().min(y.cols());
    validate_rank(r, dim)?;

    let mut rank = r;
    loop {
        if rank >= dim {
            let decomp = truncated_svd(y, dim, TRUNCATED_TOL, INTERNAL_SEED)?;
            let clipped: Vec<f64> =
                decomp.values().iter().map(|&s| (s - eta).max(0.0)).collect();
            let (result, rank_used) = build_result(&decomp, &clipped);
            return Ok(CertifiedProjection {
                result,
                threshold: eta,
                certified: true,
                rank_used,
                svd_rank_computed: dim,
            });
        }

        let decomp = truncated_svd(y, rank + 1, TRUNCATED_TOL, INTERNAL_SEED)?;
        let values: Vec<f64> = decomp.values().iter().copied().collect();
        let tail = values[rank];
        if tail < eta - SOFT_THRESHOLD_SLACK {
            let clipped: Vec<f64> = values.iter().map(|&s| (s - eta).max(0.0)).collect();
            let (result, rank_used) = build_result(&decomp, &clipped);
            return Ok(CertifiedProjection {
                result,
                threshold: eta,
                certified: true,
                rank_used,
                svd_rank_computed: rank + 1,
            });
        }

        match next_rank(rank, dim, policy) {
            Escalation::Retry(next) => rank = next,
            Escalation::Fail => {
                let head_sum: f64 = values[..rank].iter().sum();
                return Err(CertProjError::CertificateFailed {
                    rank,
                    head_sum,
                    next_value: tail,
                    target: eta,
                    values,
                });
            }
            Escalation::Exact => return soft_threshold_exact(&y.to_dense(), eta),
        }
    }
}

// ---------------------------------------------------------------------------
// Spectrahedron
// ---------------------------------------------------------------------------

/// Exact projection onto the spectrahedron (symmetric PSD, unit trace) via a
/// full eigendecomposition and a signed threshold solve. The signed solve
/// also covers inputs whose positive eigenvalues sum below one (the threshold
/// simply goes negative), so the result is always PSD with unit trace.
pub fn project_spectrahedron_exact(y: &DenseMatrix) -> Result<CertifiedProjection> {
    validate_symmetric(y, 1e-12, "project_spectrahedron_exact")?;
    let decomp = symmetric_eigen_dense(y)?;
    let n = decomp.values().len();
    let values: Vec<f64> = decomp.values().iter().copied().collect();
    let (clipped, lambda) = simplex_threshold_signed(&values, 1.0)?;
    let (result, rank_used) = build_result(&decomp, &clipped);
    Ok(CertifiedProjection {
        result,
        threshold: lambda,
        certified: true,
        rank_used,
        svd_rank_computed: n,
    })
}

/// Certified rank-r truncated projection onto the spectrahedron, with the
/// eigenvalue certificate `sum_{i<=r} l_i >= 1 + r * l_{r+1}`.
pub fn project_spectrahedron_truncated(
    y: &dyn LinOp,
    r: usize,
    policy: EscalationPolicy,
) -> Result<CertifiedProjection> {
    let n = y.rows();
    if y.cols() != n {
        return Err(CertProjError::input(
            "project_spectrahedron_truncated: operator must be square",
        ));
    }
    validate_rank(r, n)?;

    let mut rank = r;
    loop {
        if rank >= n {
            let decomp = truncated_eigen_sym(y, n, TRUNCATED_TOL, INTERNAL_SEED)?;
            let values: Vec<f64> = decomp.values().iter().copied().collect();
            let (clipped, lambda) = simplex_threshold_signed(&values, 1.0)?;
            let (result, rank_used) = build_result(&decomp, &clipped);
            return Ok(CertifiedProjection {
                result,
                threshold: lambda,
                certified: true,
                rank_used,
                svd_rank_computed: n,
            });
        }

        let decomp = truncated_eigen_sym(y, rank + 1, TRUNCATED_TOL, INTERNAL_SEED)?;
        let values: Vec<f64> = decomp.values().iter().copied().collect();
        let head_sum: f64 = values[..rank].iter().sum();
        let tail = values[rank];

        if head_sum >= 1.0 + (rank as f64) * tail - CERTIFICATE_SLACK {
            // Threshold over the head alone: certificate puts the exact
            // threshold at or above the tail eigenvalue.
            let (clipped, lambda) = simplex_threshold_signed(&values[..rank], 1.0)?;
            let (result, rank_used) = build_result(&decomp.truncate(rank), &clipped);
            return Ok(CertifiedProjection {
                result,
                threshold: lambda,
                certified: true,
                rank_used,
                svd_rank_computed: rank + 1,
            });
        }

        match next_rank(rank, n, policy) {
            Escalation::Retry(next) => rank = next,
            Escalation::Fail => {
                return Err(CertProjError::CertificateFailed {
                    rank,
                    head_sum,
                    next_value: tail,
                    target: 1.0,
                    values,
                })
            }
            Escalation::Exact => {
                let dense = y.to_dense();
                let sym = (&dense + dense.transpose()) * 0.5;
                return project_spectrahedron_exact(&sym);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

enum Escalation {
    Retry(usize),
    Fail,
    Exact,
}

fn next_rank(current: usize, dim: usize, policy: EscalationPolicy) -> Escalation {
    match policy {
        EscalationPolicy::Error => Escalation::Fail,
        EscalationPolicy::FallbackExact => Escalation::Exact,
        EscalationPolicy::EscalateDoubling { cap } => {
            let limit = cap.min(dim);
            if current >= limit {
                Escalation::Fail
            } else {
                Escalation::Retry((current * 2).min(limit))
            }
        }
    }
}

fn validate_rank(r: usize, dim: usize) -> Result<()> {
    if r == 0 || r > dim {
        return Err(CertProjError::input(format!(
            "rank parameter {r} out of range [1, {dim}]"
        )));
    }
    Ok(())
}

fn require_positive(x: f64, name: &str) -> Result<()> {
    if x <= 0.0 || !x.is_finite() {
        return Err(CertProjError::input(format!(
            "{name} must be positive and finite, got {x}"
        )));
    }
    Ok(())
}
