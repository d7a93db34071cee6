//! First-order methods over the trace-norm ball, the regularized problem,
//! and the spectrahedron, each parameterized by an exact or
//! certified-truncated projection backend, with deterministic traces.

use crate::error::{CertProjError, Result};
use crate::linalg::{
    simplex_threshold, truncated_svd, DenseMatrix, DenseOp, LinOp, LowRankMatrix, SparseMatrix,
};
use crate::objectives::{Gradient, MatrixRef, Objective, ObservationSet};
use crate::projections::{
    project_spectrahedron_exact, project_spectrahedron_truncated, project_trace_ball_exact,
    project_trace_ball_truncated, soft_threshold, soft_threshold_exact, CertifiedProjection,
    EscalationPolicy, COMPONENT_DROP_TOL, TRUNCATED_TOL,
};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Instant;

/// Feasible-set geometry for the constrained solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    TraceBall { tau: f64 },
    Spectrahedron,
}

impl Geometry {
    /// Feasibility slack used on iterates.
    pub const FEASIBILITY_TOL: f64 = 1e-9;

    pub fn check_feasible(&self, x: &LowRankMatrix) -> Result<()> {
        match *self {
            Geometry::TraceBall { tau } => {
                if x.trace_norm() > tau + Self::FEASIBILITY_TOL * tau.max(1.0) {
                    return Err(CertProjError::input(format!(
                        "infeasible point: trace norm {:.6e} exceeds tau {tau:.6e}",
                        x.trace_norm()
                    )));
                }
            }
            Geometry::Spectrahedron => {
                if x.rows() != x.cols() {
                    return Err(CertProjError::input("spectrahedron point must be square"));
                }
                if (x.trace() - 1.0).abs() > Self::FEASIBILITY_TOL {
                    return Err(CertProjError::input(format!(
                        "infeasible point: trace {:.6e} != 1",
                        x.trace()
                    )));
                }
                for i in 0..x.rank() {
                    if x.left().column(i).dot(&x.right().column(i)) < 1.0 - 1e-8 {
                        return Err(CertProjError::input(
                            "infeasible point: factored form is not positive semidefinite",
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// How the projection backend computes spectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankMode {
    /// Dense full decomposition of the step matrix: the exact oracle backend.
    Exact,
    /// Certified truncation at a fixed rank, under the configured policy.
    Fixed(usize),
    /// Start at rank 2 and double on certificate failure, keeping the
    /// escalated rank for later iterations. The trace records the maximum, so
    /// a minimal certified rank can be recovered by re-running fixed ranks.
    Auto,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Step size; `None` means `1 / beta`.
    pub eta: Option<f64>,
    pub rank: RankMode,
    pub policy: EscalationPolicy,
    pub max_iters: usize,
    /// Stop once the dual gap (or, for the regularized solver, the proximal
    /// mapping residual) is at or below this.
    pub tol: f64,
    pub seed: u64,
    /// Apply the Nesterov momentum schedule on the proximal-gradient solver.
    pub accelerate: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eta: None,
            rank: RankMode::Auto,
            policy: EscalationPolicy::escalate_to_full(),
            max_iters: 5_000,
            tol: 1e-6,
            seed: 0,
            accelerate: false,
        }
    }
}

/// One per-iterate record. `certified`, `rank_used` and `svd_rank_computed`
/// describe the projection that produced this iterate (trivial for t = 0).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub objective: f64,
    pub dual_gap: f64,
    pub iterate_rank: usize,
    pub certified: bool,
    pub rank_used: usize,
    pub svd_rank_computed: usize,
    pub momentum: Option<f64>,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SolverTrace {
    pub records: Vec<IterationRecord>,
    /// True when the run stopped on the gap tolerance rather than the
    /// iteration cap.
    pub converged: bool,
}

impl SolverTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn all_certified(&self) -> bool {
        self.records.iter().all(|r| r.certified)
    }

    /// Largest spectral solve used by any projection in the run.
    pub fn max_svd_rank(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.svd_rank_computed)
            .max()
            .unwrap_or(0)
    }

    pub fn final_gap(&self) -> f64 {
        self.records.last().map_or(f64::INFINITY, |r| r.dual_gap)
    }

    pub fn final_objective(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.objective)
    }
}

// ---------------------------------------------------------------------------
// Step matrices and the projection backend
// ---------------------------------------------------------------------------

/// `lr_scale * L + sp_scale * S` without owning the parts.
struct StepOp<'a> {
    lr: &'a LowRankMatrix,
    lr_scale: f64,
    sp: &'a SparseMatrix,
    sp_scale: f64,
}

impl LinOp for StepOp<'_> {
    fn rows(&self) -> usize {
        self.lr.rows()
    }

    fn cols(&self) -> usize {
        self.lr.cols()
    }

    fn matvec(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        let mut tmp = DVector::zeros(self.rows());
        self.lr.matvec(x, &mut tmp);
        SparseMatrix::matvec(self.sp, x, y);
        y.axpy(self.lr_scale, &tmp, self.sp_scale);
    }

    fn rmatvec(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        let mut tmp = DVector::zeros(self.cols());
        self.lr.rmatvec(x, &mut tmp);
        SparseMatrix::rmatvec(self.sp, x, y);
        y.axpy(self.lr_scale, &tmp, self.sp_scale);
    }
}

/// The gradient-step matrix `X - eta * grad(X)`, kept in operator form
/// whenever the gradient is sparse (or sparse plus a ridge multiple of X).
enum StepMatrix<'a> {
    Dense(DenseMatrix),
    Factored {
        lr: &'a LowRankMatrix,
        lr_scale: f64,
        sp: &'a SparseMatrix,
        sp_scale: f64,
    },
}

impl<'a> StepMatrix<'a> {
    fn build(x: &'a LowRankMatrix, grad: &'a Gradient, eta: f64) -> Self {
        match grad {
            Gradient::Dense(g) => StepMatrix::Dense(x.to_dense() - g * eta),
            Gradient::Sparse(s) => StepMatrix::Factored {
                lr: x,
                lr_scale: 1.0,
                sp: s,
                sp_scale: -eta,
            },
            Gradient::SparseRidge { sparse, point_coeff } => StepMatrix::Factored {
                lr: x,
                lr_scale: 1.0 - eta * point_coeff,
                sp: sparse,
                sp_scale: -eta,
            },
        }
    }

    fn to_dense(&self) -> DenseMatrix {
        match self {
            StepMatrix::Dense(y) => y.clone(),
            StepMatrix::Factored {
                lr,
                lr_scale,
                sp,
                sp_scale,
            } => lr.to_dense() * *lr_scale + sp.to_dense() * *sp_scale,
        }
    }

    fn with_operator<T>(&self, f: impl FnOnce(&dyn LinOp) -> T) -> T {
        match self {
            StepMatrix::Dense(y) => f(&DenseOp(y)),
            StepMatrix::Factored {
                lr,
                lr_scale,
                sp,
                sp_scale,
            } => f(&StepOp {
                lr,
                lr_scale: *lr_scale,
                sp,
                sp_scale: *sp_scale,
            }),
        }
    }
}

/// Tracks the working rank across iterations for `RankMode::Auto`.
struct Backend {
    mode: RankMode,
    policy: EscalationPolicy,
    auto_rank: usize,
}

impl Backend {
    fn new(cfg: &SolverConfig) -> Self {
        Backend {
            mode: cfg.rank,
            policy: cfg.policy,
            auto_rank: 2,
        }
    }

    fn project(&mut self, geometry: &Geometry, step: &StepMatrix) -> Result<CertifiedProjection> {
        let projection = match (self.mode, geometry) {
            (RankMode::Exact, Geometry::TraceBall { tau }) => {
                project_trace_ball_exact(&step.to_dense(), *tau)?
            }
            (RankMode::Exact, Geometry::Spectrahedron) => {
                let y = step.to_dense();
                let sym = (&y + y.transpose()) * 0.5;
                project_spectrahedron_exact(&sym)?
            }
            (RankMode::Fixed(r), Geometry::TraceBall { tau }) => {
                step.with_operator(|op| project_trace_ball_truncated(op, *tau, r, self.policy))?
            }
            (RankMode::Fixed(r), Geometry::Spectrahedron) => {
                step.with_operator(|op| project_spectrahedron_truncated(op, r, self.policy))?
            }
            (RankMode::Auto, geometry) => {
                let r = self.auto_rank;
                let policy = EscalationPolicy::escalate_to_full();
                let projection = match geometry {
                    Geometry::TraceBall { tau } => step
                        .with_operator(|op| project_trace_ball_truncated(op, *tau, r, policy))?,
                    Geometry::Spectrahedron => {
                        step.with_operator(|op| project_spectrahedron_truncated(op, r, policy))?
                    }
                };
                // Keep the escalated rank for subsequent iterations.
                self.auto_rank = self
                    .auto_rank
                    .max(projection.svd_rank_computed.saturating_sub(1).max(1));
                projection
            }
        };
        Ok(projection)
    }

    fn soft_threshold(&mut self, step: &StepMatrix, eta: f64) -> Result<CertifiedProjection> {
        let projection = match self.mode {
            RankMode::Exact => soft_threshold_exact(&step.to_dense(), eta)?,
            RankMode::Fixed(r) => {
                step.with_operator(|op| soft_threshold(op, eta, r, self.policy))?
            }
            RankMode::Auto => {
                let r = self.auto_rank;
                let projection = step.with_operator(|op| {
                    soft_threshold(op, eta, r, EscalationPolicy::escalate_to_full())
                })?;
                self.auto_rank = self
                    .auto_rank
                    .max(projection.svd_rank_computed.saturating_sub(1).max(1));
                projection
            }
        };
        Ok(projection)
    }
}

// ---------------------------------------------------------------------------
// Dual gap
// ---------------------------------------------------------------------------

/// Duality gap of a feasible `x`: the maximum of `(x - v) . grad` over the
/// feasible set. For the ball the maximizer is `-tau u_1 v_1^T` of the
/// gradient, giving `x . grad + tau * s_1(grad)`; for the spectrahedron it is
/// the eigenvector of the smallest eigenvalue, giving
/// `x . grad - lambda_min(grad)`. Upper-bounds `f(x) - f*` by convexity.
pub fn dual_gap(x: &LowRankMatrix, grad: &Gradient, geometry: &Geometry) -> Result<f64> {
    let inner = grad.dot_point(MatrixRef::Factored(x));
    match *geometry {
        Geometry::TraceBall { tau } => {
            let top = grad.singular_values_head(x, 1)?[0];
            Ok(inner + tau * top)
        }
        Geometry::Spectrahedron => Ok(inner - grad.min_eigenvalue_sym(x)?),
    }
}

/// Mini-batch size above which the projected stochastic gradient mapping has
/// expected rank at most `r' + 1`: `128 G^2 / (3 gap^2) * ln((m+n) min(m,n))`.
pub fn sgd_batch_bound(g_bound: f64, gap: f64, m: usize, n: usize) -> f64 {
    let dims = ((m + n) * m.min(n)) as f64;
    128.0 * g_bound * g_bound / (3.0 * gap * gap) * dims.ln()
}

// ---------------------------------------------------------------------------
// Deterministic first-order solvers
// ---------------------------------------------------------------------------

enum MomentumKind {
    None,
    Constant(f64),
    Nesterov(NesterovSchedule),
}

/// The momentum recursion for the general accelerated method:
/// `a_0 = 1/2`, `a_{t+1}` the positive root of `a^2 + a_t^2 a - a_t^2 = 0`,
/// and `b_t = a_t (1 - a_t) / (a_t^2 + a_{t+1})`.
#[derive(Debug, Clone)]
pub struct NesterovSchedule {
    a: f64,
}

impl NesterovSchedule {
    pub fn new() -> Self {
        NesterovSchedule { a: 0.5 }
    }

    pub fn current_a(&self) -> f64 {
        self.a
    }

    /// Returns `b_t` and advances `a_t -> a_{t+1}`.
    pub fn next_momentum(&mut self) -> f64 {
        let a = self.a;
        let a2 = a * a;
        let a_next = 0.5 * (-a2 + (a2 * a2 + 4.0 * a2).sqrt());
        let b = a * (1.0 - a) / (a2 + a_next);
        self.a = a_next;
        b
    }
}

impl Default for NesterovSchedule {
    fn default() -> Self {
        Self::new()
    }
}

/// Callback invoked with every iterate as it is produced (including the
/// start point at t = 0); used for sequence-level comparisons and logging.
pub type IterateObserver<'a> = &'a mut dyn FnMut(usize, &LowRankMatrix);

/// Projected gradient descent: `X_{t+1} = P(X_t - eta grad f(X_t))`.
pub fn pgd(
    obj: &dyn Objective,
    geometry: &Geometry,
    x0: &LowRankMatrix,
    cfg: &SolverConfig,
) -> Result<(LowRankMatrix, SolverTrace)> {
    run_momentum_solver(obj, geometry, x0, cfg, MomentumKind::None, None)
}

/// `pgd` with an iterate observer.
pub fn pgd_observed(
    obj: &dyn Objective,
    geometry: &Geometry,
    x0: &LowRankMatrix,
    cfg: &SolverConfig,
    observer: IterateObserver<'_>,
) -> Result<(LowRankMatrix, SolverTrace)> {
    run_momentum_solver(obj, geometry, x0, cfg, MomentumKind::None, Some(observer))
}

/// Accelerated gradient method for strongly convex objectives, with the
/// constant momentum `(sqrt(beta) - sqrt(alpha)) / (sqrt(beta) + sqrt(alpha))`.
/// The projection is applied to the extrapolated sequence `Y_t`, which may
/// leave the feasible set; only the `X_t` sequence is feasible.
pub fn agd_strongly_convex(
    obj: &dyn Objective,
    geometry: &Geometry,
    x0: &LowRankMatrix,
    cfg: &SolverConfig,
) -> Result<(LowRankMatrix, SolverTrace)> {
    let alpha = obj.strong_convexity();
    if alpha <= 0.0 {
        return Err(CertProjError::Config(
            "agd_strongly_convex requires strong convexity (alpha > 0); use agd_general".into(),
        ));
    }
    let beta = obj.smoothness();
    let momentum = ((beta.sqrt() - alpha.sqrt()) / (beta.sqrt() + alpha.sqrt())).max(0.0);
    run_momentum_solver(obj, geometry, x0, cfg, MomentumKind::Constant(momentum), None)
}

/// `agd_strongly_convex` with an iterate observer.
pub fn agd_strongly_convex_observed(
    obj: &dyn Objective,
    geometry: &Geometry,
    x0: &LowRankMatrix,
    cfg: &SolverConfig,
    observer: IterateObserver<'_>,
) -> Result<(LowRankMatrix, SolverTrace)> {
    let alpha = obj.strong_convexity();
    if alpha <= 0.0 {
        return Err(CertProjError::Config(
            "agd_strongly_convex requires strong convexity (alpha > 0); use agd_general".into(),
        ));
    }
    let beta = obj.smoothness();
    let momentum = ((beta.sqrt() - alpha.sqrt()) / (beta.sqrt() + alpha.sqrt())).max(0.0);
    run_momentum_solver(
        obj,
        geometry,
        x0,
        cfg,
        MomentumKind::Constant(momentum),
        Some(observer),
    )
}

/// Accelerated gradient method without strong convexity, using the
/// `NesterovSchedule` momentum.
pub fn agd_general(
    obj: &dyn Objective,
    geometry: &Geometry,
    x0: &LowRankMatrix,
    cfg: &SolverConfig,
) -> Result<(LowRankMatrix, SolverTrace)> {
    run_momentum_solver(
        obj,
        geometry,
        x0,
        cfg,
        MomentumKind::Nesterov(NesterovSchedule::new()),
        None,
    )
}

/// `agd_general` with an iterate observer.
pub fn agd_general_observed(
    obj: &dyn Objective,
    geometry: &Geometry,
    x0: &LowRankMatrix,
    cfg: &SolverConfig,
    observer: IterateObserver<'_>,
) -> Result<(LowRankMatrix, SolverTrace)> {
    run_momentum_solver(
        obj,
        geometry,
        x0,
        cfg,
        MomentumKind::Nesterov(NesterovSchedule::new()),
        Some(observer),
    )
}

fn run_momentum_solver(
    obj: &dyn Objective,
    geometry: &Geometry,
    x0: &LowRankMatrix,
    cfg: &SolverConfig,
    mut momentum: MomentumKind,
    mut observer: Option<IterateObserver<'_>>,
) -> Result<(LowRankMatrix, SolverTrace)> {
    geometry.check_feasible(x0)?;
    let eta = step_size(obj, cfg)?;
    let mut backend = Backend::new(cfg);
    let start = Instant::now();

    let mut x = x0.clone();
    let mut x_prev: Option<LowRankMatrix> = None;
    let mut trace = SolverTrace::default();
    let mut last_projection: Option<(bool, usize, usize)> = None;
    let mut last_momentum: Option<f64> = None;

    for t in 0..=cfg.max_iters {
        if let Some(observer) = observer.as_mut() {
            observer(t, &x);
        }
        let grad = obj.gradient(MatrixRef::Factored(&x));
        let gap = dual_gap(&x, &grad, geometry)?;
        let (certified, rank_used, svd_rank) = last_projection.unwrap_or((true, x.rank(), 0));
        trace.records.push(IterationRecord {
            t,
            objective: obj.value(MatrixRef::Factored(&x)),
            dual_gap: gap,
            iterate_rank: x.numerical_rank(1e-10),
            certified,
            rank_used,
            svd_rank_computed: svd_rank,
            momentum: last_momentum,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if gap <= cfg.tol {
            trace.converged = true;
            break;
        }
        if t == cfg.max_iters {
            break;
        }

        // Extrapolated point Y_t (equals X_t for plain projected gradient).
        let b = match &mut momentum {
            MomentumKind::None => None,
            MomentumKind::Constant(b) => Some(*b),
            MomentumKind::Nesterov(schedule) => Some(schedule.next_momentum()),
        };
        let (y_point, y_grad);
        match (b, &x_prev) {
            (Some(b), Some(prev)) if b > 0.0 => {
                let y = LowRankMatrix::linear_combination(1.0 + b, &x, -b, prev);
                y_grad = obj.gradient(MatrixRef::Factored(&y));
                y_point = y;
            }
            _ => {
                y_point = x.clone();
                y_grad = grad;
            }
        }

        let step = StepMatrix::build(&y_point, &y_grad, eta);
        let projection = backend
            .project(geometry, &step)
            .map_err(|e| e.at_iteration(t))?;
        last_projection = Some((
            projection.certified,
            projection.rank_used,
            projection.svd_rank_computed,
        ));
        last_momentum = b;
        x_prev = Some(std::mem::replace(&mut x, projection.result));
    }

    Ok((x, trace))
}

/// Proximal gradient for the trace-norm-regularized problem
/// `min f(X) + |X|_*`: ISTA steps `X_{t+1} = T_eta(X_t - eta grad f(X_t))`
/// through the certified soft-threshold, with optional Nesterov acceleration
/// (`cfg.accelerate`). The recorded `objective` is the composite value and
/// `dual_gap` holds the proximal-mapping residual `|X_{t+1} - X_t|_F / eta`.
pub fn proximal_gradient_regularized(
    obj: &dyn Objective,
    x0: &LowRankMatrix,
    cfg: &SolverConfig,
) -> Result<(LowRankMatrix, SolverTrace)> {
    proximal_gradient_regularized_observed_impl(obj, x0, cfg, None)
}

/// `proximal_gradient_regularized` with an iterate observer.
pub fn proximal_gradient_regularized_observed(
    obj: &dyn Objective,
    x0: &LowRankMatrix,
    cfg: &SolverConfig,
    observer: IterateObserver<'_>,
) -> Result<(LowRankMatrix, SolverTrace)> {
    proximal_gradient_regularized_observed_impl(obj, x0, cfg, Some(observer))
}

fn proximal_gradient_regularized_observed_impl(
    obj: &dyn Objective,
    x0: &LowRankMatrix,
    cfg: &SolverConfig,
    mut observer: Option<IterateObserver<'_>>,
) -> Result<(LowRankMatrix, SolverTrace)> {
    let eta = step_size(obj, cfg)?;
    if eta > 1.0 / obj.smoothness() + 1e-15 {
        return Err(CertProjError::input(format!(
            "proximal gradient requires eta <= 1/beta = {:.6e}, got {eta:.6e}",
            1.0 / obj.smoothness()
        )));
    }
    let mut backend = Backend::new(cfg);
    let mut schedule = cfg.accelerate.then(NesterovSchedule::new);
    let start = Instant::now();

    let mut x = x0.clone();
    let mut x_prev: Option<LowRankMatrix> = None;
    let mut residual = f64::INFINITY;
    let mut trace = SolverTrace::default();
    let mut last_projection: Option<(bool, usize, usize)> = None;
    let mut last_momentum: Option<f64> = None;

    for t in 0..=cfg.max_iters {
        if let Some(observer) = observer.as_mut() {
            observer(t, &x);
        }
        let composite = obj.value(MatrixRef::Factored(&x)) + x.trace_norm();
        let (certified, rank_used, svd_rank) = last_projection.unwrap_or((true, x.rank(), 0));
        trace.records.push(IterationRecord {
            t,
            objective: composite,
            dual_gap: residual,
            iterate_rank: x.numerical_rank(1e-10),
            certified,
            rank_used,
            svd_rank_computed: svd_rank,
            momentum: last_momentum,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if residual <= cfg.tol {
            trace.converged = true;
            break;
        }
        if t == cfg.max_iters {
            break;
        }

        let b = schedule.as_mut().map(|s| s.next_momentum());
        let (y_point, y_grad);
        match (b, &x_prev) {
            (Some(b), Some(prev)) if b > 0.0 => {
                let y = LowRankMatrix::linear_combination(1.0 + b, &x, -b, prev);
                y_grad = obj.gradient(MatrixRef::Factored(&y));
                y_point = y;
            }
            _ => {
                y_point = x.clone();
                y_grad = obj.gradient(MatrixRef::Factored(&x));
            }
        }

        let step = StepMatrix::build(&y_point, &y_grad, eta);
        let projection = backend
            .soft_threshold(&step, eta)
            .map_err(|e| e.at_iteration(t))?;
        last_projection = Some((
            projection.certified,
            projection.rank_used,
            projection.svd_rank_computed,
        ));
        last_momentum = b;
        let next = projection.result;
        residual = LowRankMatrix::linear_combination(1.0, &next, -1.0, &x).fro_norm() / eta;
        x_prev = Some(std::mem::replace(&mut x, next));
    }

    Ok((x, trace))
}

/// Projected SGD with mini-batches:
/// `X_{t+1} = P(X_t - (eta/k) sum_i G_i)` with `G_i` drawn from the
/// objective's stochastic oracle. The recorded dual gap uses the exact
/// gradient, so stopping behaves like the deterministic solvers.
pub fn sgd_minibatch(
    obj: &dyn Objective,
    geometry: &Geometry,
    x0: &LowRankMatrix,
    cfg: &SolverConfig,
    batch: usize,
) -> Result<(LowRankMatrix, SolverTrace)> {
    if obj.stochastic_bound().is_none() {
        return Err(CertProjError::Config(
            "sgd_minibatch requires an objective with a stochastic oracle".into(),
        ));
    }
    if batch == 0 {
        return Err(CertProjError::input("sgd_minibatch: batch must be positive"));
    }
    geometry.check_feasible(x0)?;
    let eta = step_size(obj, cfg)?;
    let mut backend = Backend::new(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = Instant::now();

    let mut x = x0.clone();
    let mut trace = SolverTrace::default();
    let mut last_projection: Option<(bool, usize, usize)> = None;

    for t in 0..=cfg.max_iters {
        let exact_grad = obj.gradient(MatrixRef::Factored(&x));
        let gap = dual_gap(&x, &exact_grad, geometry)?;
        let (certified, rank_used, svd_rank) = last_projection.unwrap_or((true, x.rank(), 0));
        trace.records.push(IterationRecord {
            t,
            objective: obj.value(MatrixRef::Factored(&x)),
            dual_gap: gap,
            iterate_rank: x.numerical_rank(1e-10),
            certified,
            rank_used,
            svd_rank_computed: svd_rank,
            momentum: None,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if gap <= cfg.tol {
            trace.converged = true;
            break;
        }
        if t == cfg.max_iters {
            break;
        }

        let averaged = average_samples(obj, &x, batch, &mut rng)?;
        let step = StepMatrix::build(&x, &averaged, eta);
        let projection = backend
            .project(geometry, &step)
            .map_err(|e| e.at_iteration(t))?;
        last_projection = Some((
            projection.certified,
            projection.rank_used,
            projection.svd_rank_computed,
        ));
        x = projection.result;
    }

    Ok((x, trace))
}

fn average_samples(
    obj: &dyn Objective,
    x: &LowRankMatrix,
    batch: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Gradient> {
    let (rows, cols) = obj.shape();
    let mut sparse_acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut dense_acc: Option<DenseMatrix> = None;
    let mut ridge_acc = 0.0;

    for _ in 0..batch {
        let sample = obj
            .sample_gradient(MatrixRef::Factored(x), rng)
            .ok_or_else(|| CertProjError::Config("stochastic oracle returned no sample".into()))?;
        match sample {
            Gradient::Sparse(s) => {
                for (i, j, v) in s.iter() {
                    *sparse_acc.entry((i, j)).or_insert(0.0) += v;
                }
            }
            Gradient::Dense(g) => {
                *dense_acc.get_or_insert_with(|| DMatrix::zeros(rows, cols)) += g;
            }
            Gradient::SparseRidge { sparse, point_coeff } => {
                for (i, j, v) in sparse.iter() {
                    *sparse_acc.entry((i, j)).or_insert(0.0) += v;
                }
                ridge_acc += point_coeff;
            }
        }
    }

    let inv = 1.0 / batch as f64;
    if let Some(mut dense) = dense_acc {
        for ((i, j), v) in sparse_acc {
            dense[(i, j)] += v;
        }
        dense *= inv;
        if ridge_acc != 0.0 {
            dense += x.to_dense() * (ridge_acc * inv);
        }
        return Ok(Gradient::Dense(dense));
    }
    let triplets: Vec<(usize, usize, f64)> = sparse_acc
        .into_iter()
        .map(|((i, j), v)| (i, j, v * inv))
        .collect();
    let sparse = SparseMatrix::from_triplets(rows, cols, triplets)?;
    if ridge_acc != 0.0 {
        Ok(Gradient::SparseRidge {
            sparse,
            point_coeff: ridge_acc * inv,
        })
    } else {
        Ok(Gradient::Sparse(sparse))
    }
}

// ---------------------------------------------------------------------------
// Warm start
// ---------------------------------------------------------------------------

/// Seed for the warm-start spectral solve.
const WARM_START_SEED: u64 = 0x3a9a;

/// Mean-filled warm start: build `R` with observed values and the observation
/// mean elsewhere (held as a rank-one mean matrix plus sparse deviations,
/// never densified), take its rank-r truncated SVD, and project that onto the
/// trace-norm ball of radius `tau`.
pub fn warm_start(obs: &ObservationSet, tau: f64, r: usize) -> Result<LowRankMatrix> {
    if obs.is_empty() {
        return Err(CertProjError::input("warm_start: empty observation set"));
    }
    if tau.is_nan() || tau <= 0.0 {
        return Err(CertProjError::input("warm_start: tau must be positive"));
    }
    let (m, n) = (obs.rows(), obs.cols());
    let r = r.clamp(1, m.min(n));
    let mean = obs.mean_value();
    let mean_matrix = LowRankMatrix::rank_one(
        DVector::from_element(m, 1.0),
        DVector::from_element(n, 1.0),
        mean,
    )?;
    let deviations = SparseMatrix::from_triplets(
        m,
        n,
        obs.entries().iter().map(|&(i, j, v)| (i, j, v - mean)),
    )?;
    let op = StepOp {
        lr: &mean_matrix,
        lr_scale: 1.0,
        sp: &deviations,
        sp_scale: 1.0,
    };
    let decomp = truncated_svd(&op, r, TRUNCATED_TOL, WARM_START_SEED)?;

    let values: Vec<f64> = decomp.values().iter().copied().collect();
    let total: f64 = values.iter().sum();
    let clipped = if total <= tau {
        values
    } else {
        simplex_threshold(&values, tau)?.0
    };
    let keep: Vec<usize> = (0..clipped.len())
        .filter(|&i| clipped[i] > COMPONENT_DROP_TOL)
        .collect();
    if keep.is_empty() {
        return Ok(LowRankMatrix::zeros(m, n));
    }
    let mut u = DMatrix::zeros(m, keep.len());
    let mut v = DMatrix::zeros(n, keep.len());
    let mut s = DVector::zeros(keep.len());
    for (col, &i) in keep.iter().enumerate() {
        u.column_mut(col).copy_from(&decomp.left().column(i));
        v.column_mut(col).copy_from(&decomp.right().column(i));
        s[col] = clipped[i];
    }
    Ok(LowRankMatrix::from_parts_unchecked(u, s, v))
}

fn step_size(obj: &dyn Objective, cfg: &SolverConfig) -> Result<f64> {
    let beta = obj.smoothness();
    if beta.is_nan() || beta <= 0.0 {
        return Err(CertProjError::Config(format!(
            "objective smoothness must be positive, got {beta}"
        )));
    }
    let eta = cfg.eta.unwrap_or(1.0 / beta);
    if eta <= 0.0 || !eta.is_finite() {
        return Err(CertProjError::input(format!(
            "step size must be positive and finite, got {eta}"
        )));
    }
    Ok(eta)
}
