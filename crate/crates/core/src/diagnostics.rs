//! Numerical evaluation of the certified-radius theory at a candidate
//! optimum: gradient spectrum and multiplicity reports, closed-form radius
//! lower bounds for the three settings, empirical radius probes, and the
//! rank-stability probe under ball inflation.

use crate::error::{CertProjError, Result};
use crate::linalg::{full_svd, value_multiplicity, DenseMatrix, LinOp, LowRankMatrix};
use crate::objectives::{MatrixRef, Objective};
use crate::projections::{
    project_trace_ball_exact, project_spectrahedron_exact, soft_threshold_exact,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Numerical rank threshold on projected matrices: values above
/// `1e-10 * s_1` count (clipping produces exact zeros analytically).
pub const RANK_REL_TOL: f64 = 1e-10;

/// Which problem family a bound or probe refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting {
    /// Trace-norm ball of radius tau.
    Ball { tau: f64 },
    /// Trace-norm regularized (soft-threshold mapping).
    Regularized,
    /// Unit-trace PSD matrices.
    Spectrahedron,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapEntry {
    pub r_prime: usize,
    pub gap: f64,
}

/// Gradient-spectrum report at a candidate optimum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Top singular values of the gradient, nonincreasing.
    pub gradient_values: Vec<f64>,
    /// Multiplicity of the top value at `rel_tol`.
    pub top_multiplicity: usize,
    pub rel_tol: f64,
    /// Spectral gaps `mu_1 - mu_{r'+1}` for r' from the multiplicity up to
    /// the report depth; nonnegative and nondecreasing in r'.
    pub gaps: Vec<GapEntry>,
    pub xstar_rank: usize,
    /// Worst alignment mismatch of the optimum's singular pairs against the
    /// gradient's top singular value.
    pub alignment_residual: f64,
    /// True when the gradient vanishes at the point; the multiplicity and
    /// gap claims are vacuous in that case.
    pub gradient_vanishes: bool,
}

/// Computes the top-`depth` gradient singular values at `xstar`, the top
/// multiplicity, and the gap table. A multiplicity equal to `depth` means the
/// cluster may extend further; raise `depth` to resolve it.
pub fn spectrum_report(
    xstar: &LowRankMatrix,
    obj: &dyn Objective,
    depth: usize,
    rel_tol: f64,
) -> Result<SpectrumReport> {
    let (m, n) = obj.shape();
    let dim = m.min(n);
    if depth == 0 || depth > dim {
        return Err(CertProjError::input(format!(
            "spectrum_report: depth {depth} out of range [1, {dim}]"
        )));
    }
    let grad = obj.gradient(MatrixRef::Factored(xstar));
    let values = grad.singular_values_head(xstar, depth)?;

    let gradient_vanishes = values[0] <= 1e-12;
    let top_multiplicity = if gradient_vanishes {
        0
    } else {
        value_multiplicity(&values, rel_tol)?
    };

    let mut gaps = Vec::new();
    if !gradient_vanishes {
        for r_prime in top_multiplicity..depth {
            gaps.push(GapEntry {
                r_prime,
                gap: values[0] - values[r_prime],
            });
        }
    }

    Ok(SpectrumReport {
        alignment_residual: verify_optimal_alignment(xstar, obj, 1e-12)?,
        gradient_values: values,
        top_multiplicity,
        rel_tol,
        gaps,
        xstar_rank: xstar.numerical_rank(RANK_REL_TOL),
        gradient_vanishes,
    })
}

/// Optimality alignment: at an optimum, each singular pair `(u_i, v_i)` of
/// `xstar` satisfies `-u_i^T grad v_i = s_1(grad)`. Returns the worst
/// absolute mismatch over the pairs; at most `tol`-vanishing gradients return
/// 0 by convention.
pub fn verify_optimal_alignment(
    xstar: &LowRankMatrix,
    obj: &dyn Objective,
    tol: f64,
) -> Result<f64> {
    let grad = obj.gradient(MatrixRef::Factored(xstar));
    let sigma1 = grad.singular_values_head(xstar, 1)?[0];
    let op = grad.to_operator(xstar);
    if sigma1 <= tol.max(1e-300) {
        return Ok(0.0);
    }
    let mut worst = 0.0_f64;
    let mut gv = DVector::zeros(xstar.rows());
    for i in 0..xstar.rank() {
        let vi = xstar.right().column(i).into_owned();
        op.matvec(&vi, &mut gv);
        let aligned = -xstar.left().column(i).dot(&gv);
        worst = worst.max((aligned - sigma1).abs());
    }
    Ok(worst)
}

/// The three closed-form lower bounds on the certified radius.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadiusBounds {
    /// Radius for truncation rank r0 (the top multiplicity).
    pub basic: f64,
    /// Radius for truncation rank r' >= r0 (same-rank over-parameterization).
    pub overparam_same_rank: f64,
    /// (rank, radius): a larger radius at truncation rank `r' + r0 - 1`.
    /// `None` when r' exceeds the admissible range of the extended bound
    /// (r' <= dim - r0), which is narrower than the same-rank range.
    pub overparam_extended: Option<(usize, f64)>,
}

/// Evaluates the radius lower bounds from the gradient spectrum `mu` at an
/// optimum: `mu` holds singular values (nonincreasing) for the ball and
/// regularized settings, eigenvalues (nonincreasing, signed) for the
/// spectrahedron, where the relevant gaps are `mu_{n-r'} - mu_n`.
pub fn radius_lower_bound(
    setting: &Setting,
    eta: f64,
    beta: f64,
    mu: &[f64],
    r0: usize,
    r_prime: usize,
) -> Result<RadiusBounds> {
    if eta.is_nan() || eta <= 0.0 || beta.is_nan() || beta <= 0.0 {
        return Err(CertProjError::input(
            "radius_lower_bound: eta and beta must be positive",
        ));
    }
    if mu.is_empty() || mu.windows(2).any(|w| w[0] < w[1]) {
        return Err(CertProjError::input(
            "radius_lower_bound: mu must be a nonempty nonincreasing spectrum",
        ));
    }
    let d = mu.len();
    if r0 == 0 || r0 >= d {
        return Err(CertProjError::input(format!(
            "radius_lower_bound: multiplicity r0 = {r0} out of range [1, {}]",
            d - 1
        )));
    }
    if r_prime < r0 || r_prime > d - 1 {
        return Err(CertProjError::input(format!(
            "radius_lower_bound: r' = {r_prime} out of range [{r0}, {}]",
            d - 1
        )));
    }
    // The extended bound needs r' <= d - r0 so the target rank stays valid.
    let extended_ok = r_prime <= d - r0;

    // 1-based gap indices -> 0-based slice accesses.
    let gap = |rp: usize| -> f64 {
        match setting {
            Setting::Ball { .. } | Setting::Regularized => mu[0] - mu[rp],
            Setting::Spectrahedron => mu[d - rp - 1] - mu[d - 1],
        }
    };

    let sqrt_r0 = (r0 as f64).sqrt();
    let denominator = match setting {
        Setting::Ball { .. } | Setting::Spectrahedron => {
            (1.0 + 1.0 / sqrt_r0) * (1.0 + eta * beta)
        }
        Setting::Regularized => 1.0 + eta * beta,
    };
    let extended_scale = match setting {
        Setting::Ball { .. } | Setting::Spectrahedron => {
            sqrt_r0 * eta / (2.0 * (1.0 + eta * beta))
        }
        Setting::Regularized => sqrt_r0 * eta / (1.0 + eta * beta),
    };

    let basic = eta * gap(r0) / denominator;
    let overparam_same_rank = eta * gap(r_prime) / denominator;
    let overparam_extended =
        extended_ok.then(|| (r_prime + r0 - 1, extended_scale * gap(r_prime)));

    Ok(RadiusBounds {
        basic,
        overparam_same_rank,
        overparam_extended,
    })
}

/// Exact gradient mapping at a dense point for the given setting.
fn gradient_mapping_rank(
    obj: &dyn Objective,
    setting: &Setting,
    x: &DenseMatrix,
    eta: f64,
) -> Result<usize> {
    let grad = obj.gradient(MatrixRef::Dense(x)).to_dense(MatrixRef::Dense(x));
    let y = x - grad * eta;
    let projection = match setting {
        Setting::Ball { tau } => project_trace_ball_exact(&y, *tau)?,
        Setting::Regularized => soft_threshold_exact(&y, eta)?,
        Setting::Spectrahedron => {
            let sym = (&y + y.transpose()) * 0.5;
            project_spectrahedron_exact(&sym)?
        }
    };
    Ok(projection.result.numerical_rank(RANK_REL_TOL))
}

/// Samples uniform directions at uniform radii up to `radius` around `xstar`
/// and returns the fraction of samples whose exact gradient mapping has rank
/// at most `r`. Directions live in the full matrix space (symmetrized for
/// the spectrahedron setting); samples are not restricted to the feasible
/// set.
#[allow(clippy::too_many_arguments)]
pub fn probe_radius_empirical(
    xstar: &LowRankMatrix,
    obj: &dyn Objective,
    setting: &Setting,
    eta: f64,
    r: usize,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if radius.is_nan() || radius <= 0.0 || samples == 0 {
        return Err(CertProjError::input(
            "probe_radius_empirical: radius and samples must be positive",
        ));
    }
    let center = xstar.to_dense();
    let (m, n) = (center.nrows(), center.ncols());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut successes = 0usize;
    for _ in 0..samples {
        let mut direction: DMatrix<f64> =
            DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng));
        if matches!(setting, Setting::Spectrahedron) {
            direction = (&direction + direction.transpose()) * 0.5;
        }
        let norm = direction.norm();
        if norm == 0.0 {
            continue;
        }
        let rho = radius * rng.random::<f64>();
        let x = &center + direction * (rho / norm);
        if gradient_mapping_rank(obj, setting, &x, eta)? <= r {
            successes += 1;
        }
    }
    Ok(successes as f64 / samples as f64)
}

/// Projects `xstar - eta * grad` onto the inflated ball of radius `1 + eps`
/// and returns the resulting rank. When the gradient's top multiplicity
/// exceeds `rank(xstar)`, the inflation forces the rank up to that
/// multiplicity.
pub fn rank_stability_probe(
    xstar: &LowRankMatrix,
    obj: &dyn Objective,
    eta: f64,
    epsilon: f64,
) -> Result<usize> {
    if eta.is_nan() || eta <= 0.0 {
        return Err(CertProjError::input("rank_stability_probe: eta must be positive"));
    }
    let x = xstar.to_dense();
    let grad = obj.gradient(MatrixRef::Factored(xstar)).to_dense(MatrixRef::Factored(xstar));
    if grad.norm() <= 1e-14 {
        return Err(CertProjError::input(
            "rank_stability_probe: gradient vanishes at the point",
        ));
    }
    let y = &x - grad * eta;
    let trace_norm: f64 = full_svd(&y)?.values().sum();
    let slack = trace_norm - 1.0;
    if epsilon.is_nan() || epsilon <= 0.0 || epsilon > slack {
        return Err(CertProjError::input(format!(
            "rank_stability_probe: epsilon must lie in (0, {slack:.6e}], got {epsilon}"
        )));
    }
    let projection = project_trace_ball_exact(&y, 1.0 + epsilon)?;
    Ok(projection.result.numerical_rank(RANK_REL_TOL))
}
