//! Analytic problem instances with closed-form optima, gradients, and
//! spectra; the ground-truth fixtures for the theory-level tests, plus a
//! synthetic planted matrix-completion generator.

use crate::error::{CertProjError, Result};
use crate::linalg::{full_svd, DenseMatrix, LowRankMatrix};
use crate::objectives::{
    diagonal_quadratic_objective, frobenius_distance_objective, matrix_completion_objective,
    DiagonalTerm, Objective, ObservationSet,
};
use crate::solvers::{pgd, warm_start, Geometry, RankMode, SolverConfig, SolverTrace};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// A problem instance with a known optimum over the unit trace-norm ball.
pub struct ConstructedInstance {
    pub objective: Box<dyn Objective>,
    pub xstar: LowRankMatrix,
    /// Analytic gradient at the optimum.
    pub gradient_at_xstar: DenseMatrix,
    /// Multiplicity of the top singular value of the gradient at the optimum.
    pub expected_multiplicity: usize,
    /// Spectral gap past the top multiplicity block; `None` when the top
    /// value fills the whole spectrum.
    pub expected_gap: Option<f64>,
    pub expected_rank: usize,
    /// Nearby feasible point whose gradient mapping exceeds the expected
    /// rank, where the construction provides one.
    pub adversarial: Option<LowRankMatrix>,
    /// Step sizes for which the instance's guarantees are stated (inclusive
    /// upper end).
    pub eta_range: (f64, f64),
    /// True when the gradient vanishes at the optimum, making multiplicity
    /// claims vacuous.
    pub degenerate_gradient: bool,
}

/// Diagonal matrix in factored form from (slot, value) pairs, values > 0.
fn diagonal_low_rank(rows: usize, cols: usize, slots: &[(usize, f64)]) -> LowRankMatrix {
    let mut sorted: Vec<(usize, f64)> = slots.iter().copied().filter(|&(_, v)| v > 0.0).collect();
    sorted.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let k = sorted.len();
    let mut u = DMatrix::zeros(rows, k);
    let mut v = DMatrix::zeros(cols, k);
    let mut s = DVector::zeros(k);
    for (col, &(slot, value)) in sorted.iter().enumerate() {
        u[(slot, col)] = 1.0;
        v[(slot, col)] = 1.0;
        s[col] = value;
    }
    LowRankMatrix::from_parts_unchecked(u, s, v)
}

fn diagonal_dense(rows: usize, cols: usize, slots: &[(usize, f64)]) -> DenseMatrix {
    let mut a = DMatrix::zeros(rows, cols);
    for &(slot, value) in slots {
        a[(slot, slot)] = value;
    }
    a
}

/// Frobenius-distance instance to `A = diag(1 + sigma0, sigma0, ...)`: the
/// optimum is the rank-one `E_11`, yet the gradient there is `-sigma0 * I`
/// on the diagonal, so its top singular value has full multiplicity
/// `min(m, n)`.
pub fn multiplicity_gap_instance(m: usize, n: usize, sigma0: f64) -> Result<ConstructedInstance> {
    if m == 0 || n == 0 {
        return Err(CertProjError::input("multiplicity_gap_instance: empty shape"));
    }
    if sigma0 < 0.0 || !sigma0.is_finite() {
        return Err(CertProjError::input(
            "multiplicity_gap_instance: sigma0 must be nonnegative",
        ));
    }
    let dim = m.min(n);
    let mut target_slots = vec![(0usize, 1.0 + sigma0)];
    for i in 1..dim {
        target_slots.push((i, sigma0));
    }
    let target = diagonal_dense(m, n, &target_slots);
    let objective = frobenius_distance_objective(target)?;

    let xstar = diagonal_low_rank(m, n, &[(0, 1.0)]);
    let grad_slots: Vec<(usize, f64)> = (0..dim).map(|i| (i, -sigma0)).collect();
    let gradient_at_xstar = diagonal_dense(m, n, &grad_slots);

    Ok(ConstructedInstance {
        objective: Box::new(objective),
        xstar,
        gradient_at_xstar,
        expected_multiplicity: dim,
        expected_gap: None,
        expected_rank: 1,
        adversarial: None,
        eta_range: (0.0, f64::INFINITY),
        degenerate_gradient: sigma0 == 0.0,
    })
}

/// Shared scaffold of the two adversarial diagonal instances: head weights
/// `(1 - a) / (r - 1)` on the first r-1 slots and `a` on one more slot.
fn head_lambdas(r: usize, a: f64) -> Vec<f64> {
    let mut lambdas = vec![(1.0 - a) / (r as f64 - 1.0); r - 1];
    lambdas.push(a);
    lambdas
}

fn validate_adversarial_params(n: usize, r: usize, a: f64, sigma: f64) -> Result<()> {
    if r < 2 || r + 1 > n {
        return Err(CertProjError::input(format!(
            "rank parameter r = {r} must be in [2, n-1] for n = {n}"
        )));
    }
    if a.is_nan() || a <= 0.0 || a > 1.0 / r as f64 {
        return Err(CertProjError::input(format!(
            "mass parameter a = {a} must be in (0, 1/r] = (0, {:.6}]",
            1.0 / r as f64
        )));
    }
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(CertProjError::input("sigma must be positive and finite"));
    }
    Ok(())
}

/// Diagonal quadratic whose rank-r optimum has gradient top multiplicity
/// r+1: the objective penalizes the first r diagonal slots toward
/// `lambda_i + sigma` plus a half-scaled penalty on slot r+1, which leaves a
/// gradient of `-sigma` on all r+1 slots. The adversarial point moves the
/// small mass `a` from slot r to slot r+1; its gradient mapping has rank
/// r+1 for every step size in (0, 1].
pub fn rank_lb_instance(n: usize, r: usize, a: f64, sigma: f64) -> Result<ConstructedInstance> {
    validate_adversarial_params(n, r, a, sigma)?;
    let lambdas = head_lambdas(r, a);

    let mut terms: Vec<DiagonalTerm> = lambdas
        .iter()
        .enumerate()
        .map(|(i, &l)| DiagonalTerm::plain(i, 1.0, l + sigma))
        .collect();
    // Half-scaled indicator on slot r+1 (0-based r), weighted so its gradient
    // contribution at the optimum is exactly -sigma.
    terms.push(DiagonalTerm {
        index: r,
        weight: 2.0,
        scale: 0.5,
        target: sigma,
    });
    let objective = diagonal_quadratic_objective(n, n, terms)?;
    debug_assert_eq!(objective.smoothness(), 1.0);

    let xstar_slots: Vec<(usize, f64)> = lambdas.iter().enumerate().map(|(i, &l)| (i, l)).collect();
    let xstar = diagonal_low_rank(n, n, &xstar_slots);

    let grad_slots: Vec<(usize, f64)> = (0..=r).map(|i| (i, -sigma)).collect();
    let gradient_at_xstar = diagonal_dense(n, n, &grad_slots);

    // Mass a moves from slot r (0-based r-1) to slot r+1 (0-based r).
    let mut adversarial_slots = xstar_slots.clone();
    adversarial_slots[r - 1] = (r, a);
    let adversarial = diagonal_low_rank(n, n, &adversarial_slots);

    Ok(ConstructedInstance {
        objective: Box::new(objective),
        xstar,
        gradient_at_xstar,
        expected_multiplicity: r + 1,
        expected_gap: Some(sigma),
        expected_rank: r,
        adversarial: Some(adversarial),
        eta_range: (0.0, 1.0),
        degenerate_gradient: false,
    })
}

/// Diagonal quadratic with a rank-r optimum whose gradient top multiplicity
/// is exactly r and whose spectral gap is sigma; the certified radius around
/// it is tight up to a small constant. For `a > eta * sigma` the adversarial
/// point (mass `a` on slot r+1 instead of slot r) has a gradient mapping of
/// rank r+1.
pub fn tightness_instance(
    n: usize,
    beta: f64,
    r: usize,
    sigma: f64,
    a: f64,
) -> Result<ConstructedInstance> {
    validate_adversarial_params(n, r, a, sigma)?;
    if beta <= 0.0 || !beta.is_finite() {
        return Err(CertProjError::input("beta must be positive and finite"));
    }
    let lambdas = head_lambdas(r, a);

    let terms: Vec<DiagonalTerm> = lambdas
        .iter()
        .enumerate()
        .map(|(i, &l)| DiagonalTerm {
            index: i,
            weight: beta,
            scale: 1.0,
            target: l + sigma / beta,
        })
        .collect();
    let objective = diagonal_quadratic_objective(n, n, terms)?;
    debug_assert_eq!(objective.smoothness(), beta);

    let xstar_slots: Vec<(usize, f64)> = lambdas.iter().enumerate().map(|(i, &l)| (i, l)).collect();
    let xstar = diagonal_low_rank(n, n, &xstar_slots);

    let grad_slots: Vec<(usize, f64)> = (0..r).map(|i| (i, -sigma)).collect();
    let gradient_at_xstar = diagonal_dense(n, n, &grad_slots);

    let mut adversarial_slots = xstar_slots.clone();
    adversarial_slots[r - 1] = (r, a);
    let adversarial = diagonal_low_rank(n, n, &adversarial_slots);

    Ok(ConstructedInstance {
        objective: Box::new(objective),
        xstar,
        gradient_at_xstar,
        expected_multiplicity: r,
        expected_gap: Some(sigma),
        expected_rank: r,
        adversarial: Some(adversarial),
        eta_range: (0.0, 1.0 / beta),
        degenerate_gradient: false,
    })
}

// ---------------------------------------------------------------------------
// Planted matrix completion
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct PlantedConfig {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    /// Probability that an entry is observed.
    pub density: f64,
    /// Standard deviation of additive Gaussian noise on observed values.
    pub noise: f64,
    pub seed: u64,
    /// Ball radius for the reference solve.
    pub tau: f64,
    /// Trace norm the planted matrix is scaled to. Defaults to `0.9 * tau`
    /// (slack regime); set above `tau` for a tight, constraint-active regime.
    pub ground_truth_norm: Option<f64>,
}

pub struct PlantedCompletion {
    pub observations: ObservationSet,
    pub ground_truth: LowRankMatrix,
    pub tau: f64,
}

pub struct ReferenceSolution {
    pub xstar: LowRankMatrix,
    pub fstar: f64,
    pub dual_gap: f64,
    pub trace: SolverTrace,
}

/// Samples a random rank-k matrix scaled to the requested trace norm,
/// observes a uniform entry subset, and optionally adds noise.
pub fn planted_completion_instance(cfg: &PlantedConfig) -> Result<PlantedCompletion> {
    if cfg.rank == 0 || cfg.rank > cfg.rows.min(cfg.cols) {
        return Err(CertProjError::input("planted completion: bad rank"));
    }
    if !(0.0..=1.0).contains(&cfg.density) {
        return Err(CertProjError::input("planted completion: bad density"));
    }
    if cfg.tau.is_nan() || cfg.tau <= 0.0 {
        return Err(CertProjError::input("planted completion: tau must be positive"));
    }
    let target_norm = cfg.ground_truth_norm.unwrap_or(0.9 * cfg.tau);
    if target_norm.is_nan() || target_norm <= 0.0 {
        return Err(CertProjError::input(
            "planted completion: ground-truth norm must be positive",
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let left: DMatrix<f64> =
        DMatrix::from_fn(cfg.rows, cfg.rank, |_, _| StandardNormal.sample(&mut rng));
    let right: DMatrix<f64> =
        DMatrix::from_fn(cfg.cols, cfg.rank, |_, _| StandardNormal.sample(&mut rng));
    let raw = &left * right.transpose();
    let decomp = full_svd(&raw)?;
    let scale = target_norm / decomp.values().sum();
    let values: Vec<f64> = decomp.values().iter().map(|s| s * scale).collect();
    let keep = values.iter().filter(|&&s| s > 1e-14).count();
    let ground_truth = LowRankMatrix::from_parts_unchecked(
        decomp.left().columns(0, keep).into_owned(),
        DVector::from_vec(values[..keep].to_vec()),
        decomp.right().columns(0, keep).into_owned(),
    );

    let mut entries = Vec::new();
    for i in 0..cfg.rows {
        for j in 0..cfg.cols {
            if rng.random::<f64>() < cfg.density {
                let noise: f64 = if cfg.noise > 0.0 {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    cfg.noise * g
                } else {
                    0.0
                };
                entries.push((i, j, ground_truth.entry(i, j) + noise));
            }
        }
    }
    if entries.is_empty() {
        return Err(CertProjError::input(
            "planted completion: no entries observed; raise density",
        ));
    }
    Ok(PlantedCompletion {
        observations: ObservationSet::new(cfg.rows, cfg.cols, entries)?,
        ground_truth,
        tau: cfg.tau,
    })
}

impl PlantedCompletion {
    /// Long exact-projection gradient run down to `gap_tol`, providing the
    /// reference optimum and value.
    pub fn reference_solve(&self, gap_tol: f64, max_iters: usize) -> Result<ReferenceSolution> {
        let objective = matrix_completion_objective(self.observations.clone())?;
        let r0 = self.ground_truth.rank().max(1);
        let x0 = warm_start(&self.observations, self.tau, r0)?;
        let cfg = SolverConfig {
            rank: RankMode::Exact,
            tol: gap_tol,
            max_iters,
            ..Default::default()
        };
        let geometry = Geometry::TraceBall { tau: self.tau };
        let (xstar, trace) = pgd(&objective, &geometry, &x0, &cfg)?;
        Ok(ReferenceSolution {
            fstar: trace.final_objective(),
            dual_gap: trace.final_gap(),
            xstar,
            trace,
        })
    }
}
