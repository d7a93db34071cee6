//! The experiment runner: prepares the problem, runs the configured solver,
//! computes the spectrum report and the minimal certified rank, and shapes
//! the outputs.

use crate::config::{
    parse_fixture, sniff_fixture, ConstructionSpec, ExperimentConfig, InputSource, PolicySpec,
    RankSpec, SolverKind,
};
use crate::ingest::ingest_movielens_str;
use crate::{CliError, Result};
use certproj::constructions::{
    multiplicity_gap_instance, planted_completion_instance, rank_lb_instance, tightness_instance,
    ConstructedInstance, PlantedConfig,
};
use certproj::diagnostics::spectrum_report;
use certproj::linalg::{full_svd, LowRankMatrix};
use certproj::objectives::{add_ridge, matrix_completion_objective, Objective, ObservationSet};
use certproj::projections::{project_trace_ball_exact, EscalationPolicy};
use certproj::solvers::{
    agd_general, agd_strongly_convex, pgd, proximal_gradient_regularized, sgd_minibatch,
    warm_start, Geometry, IterationRecord, RankMode, SolverConfig, SolverTrace,
};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use std::io::Write;
use std::path::Path;

/// Multiplicity tolerance for spectra of computed (solver) optima.
const COMPUTED_REL_TOL: f64 = 1e-6;

/// Final report; the fields mirror the completion-experiment table schema
/// (dataset, trace bound, optimum rank, gradient multiplicity, solver rank,
/// MSE, spectral gap). Purely a function of (config, seed, input bytes).
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub dataset: String,
    pub tau: f64,
    pub solver: String,
    pub xstar_rank: usize,
    /// Multiplicity of the top gradient singular value at the final iterate.
    pub top_multiplicity: usize,
    /// Gap past the top multiplicity block, when the spectrum resolves one.
    pub spectral_gap: Option<f64>,
    /// Smallest fixed rank whose re-run certifies every iteration (searched
    /// for auto-rank runs; the configured rank for fixed-rank runs when it
    /// certified throughout).
    pub minimal_certified_rank: Option<usize>,
    /// Final objective divided by the number of observations (completion
    /// inputs only).
    pub mse: Option<f64>,
    pub final_objective: f64,
    pub iterations: usize,
    pub dual_gap_at_stop: f64,
    pub converged: bool,
    pub all_certified: bool,
    pub max_svd_rank: usize,
}

/// One iteration-log line (JSON-lines / CSV schema).
#[derive(Debug, Clone, Serialize)]
pub struct LogRecord {
    pub t: usize,
    pub f: f64,
    pub dual_gap: f64,
    pub iterate_rank: usize,
    pub rank_used: usize,
    pub certified: bool,
    pub elapsed_ms: f64,
}

impl From<&IterationRecord> for LogRecord {
    fn from(r: &IterationRecord) -> Self {
        LogRecord {
            t: r.t,
            f: r.objective,
            dual_gap: r.dual_gap,
            iterate_rank: r.iterate_rank,
            rank_used: r.rank_used,
            certified: r.certified,
            elapsed_ms: r.elapsed_ms,
        }
    }
}

pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub log: Vec<LogRecord>,
    pub solution: LowRankMatrix,
}

enum Problem {
    Completion { obs: ObservationSet },
    Construction { instance: Box<ConstructedInstance> },
}

fn prepare_problem(cfg: &ExperimentConfig) -> Result<Problem> {
    match &cfg.input {
        InputSource::Dataset(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::io(path.display().to_string(), e))?;
            if sniff_fixture(&text) {
                build_construction(&parse_fixture(&text)?, cfg)
            } else {
                let (obs, _) = ingest_movielens_str(&text)?;
                Ok(Problem::Completion { obs })
            }
        }
        InputSource::Construction(spec) => build_construction(spec, cfg),
    }
}

fn as_count(spec: &ConstructionSpec, key: &str) -> Result<usize> {
    let raw = spec.require(key)?;
    if raw < 1.0 || raw.fract() != 0.0 {
        return Err(CliError::input(format!(
            "construction `{}`: parameter `{key}` must be a positive integer, got {raw}",
            spec.kind
        )));
    }
    Ok(raw as usize)
}

fn build_construction(spec: &ConstructionSpec, cfg: &ExperimentConfig) -> Result<Problem> {
    match spec.kind.as_str() {
        "multiplicity-gap" => {
            let m = as_count(spec, "m")?;
            let n = as_count(spec, "n")?;
            let sigma0 = spec.require("sigma0")?;
            Ok(Problem::Construction {
                instance: Box::new(multiplicity_gap_instance(m, n, sigma0)?),
            })
        }
        "rank-lb" => {
            let n = as_count(spec, "n")?;
            let r = as_count(spec, "r")?;
            Ok(Problem::Construction {
                instance: Box::new(rank_lb_instance(n, r, spec.require("a")?, spec.require("sigma")?)?),
            })
        }
        "tightness" => {
            let n = as_count(spec, "n")?;
            let r = as_count(spec, "r")?;
            Ok(Problem::Construction {
                instance: Box::new(tightness_instance(
                    n,
                    spec.param("beta").unwrap_or(1.0),
                    r,
                    spec.require("sigma")?,
                    spec.require("a")?,
                )?),
            })
        }
        "planted" => {
            let planted = planted_completion_instance(&PlantedConfig {
                rows: as_count(spec, "m")?,
                cols: as_count(spec, "n")?,
                rank: as_count(spec, "k")?,
                density: spec.param("density").unwrap_or(1.0),
                noise: spec.param("noise").unwrap_or(0.0),
                seed: spec.param("seed").map(|s| s as u64).unwrap_or(cfg.seed),
                tau: cfg.tau,
                ground_truth_norm: spec.param("gt-norm"),
            })?;
            Ok(Problem::Completion {
                obs: planted.observations,
            })
        }
        other => Err(CliError::input(format!(
            "unknown construction `{other}` (known: multiplicity-gap, rank-lb, tightness, planted)"
        ))),
    }
}

fn solver_config(cfg: &ExperimentConfig, rank: RankMode, policy: EscalationPolicy) -> SolverConfig {
    SolverConfig {
        eta: cfg.eta,
        rank,
        policy,
        max_iters: cfg.max_iters,
        tol: cfg.tol,
        seed: cfg.seed,
        accelerate: cfg.solver == SolverKind::Prox,
    }
}

fn rank_mode(rank: RankSpec) -> RankMode {
    match rank {
        RankSpec::Auto => RankMode::Auto,
        RankSpec::Fixed(n) => RankMode::Fixed(n),
    }
}

fn escalation(policy: PolicySpec) -> EscalationPolicy {
    match policy {
        PolicySpec::Error => EscalationPolicy::Error,
        PolicySpec::Escalate => EscalationPolicy::escalate_to_full(),
        PolicySpec::Exact => EscalationPolicy::FallbackExact,
    }
}

/// Completion objective with the configured ridge and (for sgd) oracle.
fn completion_objective(
    obs: &ObservationSet,
    cfg: &ExperimentConfig,
) -> Result<Box<dyn Objective>> {
    let mut base = matrix_completion_objective(obs.clone())?;
    if cfg.solver == SolverKind::Sgd {
        base = base.with_stochastic_oracle(cfg.tau);
    }
    if cfg.ridge > 0.0 {
        Ok(Box::new(add_ridge(base, cfg.ridge)?))
    } else {
        Ok(Box::new(base))
    }
}

/// Start point: the mean-filled warm start for completion inputs; a feasible
/// perturbation of the analytic optimum for constructions.
fn start_point(
    problem: &Problem,
    cfg: &ExperimentConfig,
    warm_rank: usize,
) -> Result<LowRankMatrix> {
    match problem {
        Problem::Completion { obs } => Ok(warm_start(obs, cfg.tau, warm_rank)?),
        Problem::Construction { instance } => {
            let radius = construction_start_radius(instance, cfg);
            let (m, n) = (instance.xstar.rows(), instance.xstar.cols());
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x57a7);
            let direction: DMatrix<f64> =
                DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng));
            let x = instance.xstar.to_dense() + &direction * (radius / direction.norm());
            Ok(project_trace_ball_exact(&x, cfg.tau)?.result)
        }
    }
}

/// Half the basic certified radius when the instance's spectrum resolves a
/// gap; a small default otherwise.
fn construction_start_radius(instance: &ConstructedInstance, cfg: &ExperimentConfig) -> f64 {
    let fallback = 0.05;
    if instance.degenerate_gradient {
        return fallback;
    }
    let Ok(decomp) = full_svd(&instance.gradient_at_xstar) else {
        return fallback;
    };
    let mu: Vec<f64> = decomp.values().iter().copied().collect();
    let r0 = instance.expected_multiplicity;
    if r0 == 0 || r0 >= mu.len() {
        return fallback;
    }
    let beta = instance.objective.smoothness();
    let eta = cfg.eta.unwrap_or(1.0 / beta);
    let gap = mu[0] - mu[r0];
    let radius = eta * gap / ((1.0 + 1.0 / (r0 as f64).sqrt()) * (1.0 + eta * beta));
    if radius > 0.0 {
        0.5 * radius
    } else {
        fallback
    }
}

fn run_solver(
    cfg: &ExperimentConfig,
    objective: &dyn Objective,
    x0: &LowRankMatrix,
    rank: RankMode,
    policy: EscalationPolicy,
) -> certproj::Result<(LowRankMatrix, SolverTrace)> {
    let solver_cfg = solver_config(cfg, rank, policy);
    let geometry = Geometry::TraceBall { tau: cfg.tau };
    match cfg.solver {
        SolverKind::Pgd => pgd(objective, &geometry, x0, &solver_cfg),
        SolverKind::AgdSc => agd_strongly_convex(objective, &geometry, x0, &solver_cfg),
        SolverKind::Agd => agd_general(objective, &geometry, x0, &solver_cfg),
        SolverKind::Prox => proximal_gradient_regularized(objective, x0, &solver_cfg),
        SolverKind::Sgd => sgd_minibatch(objective, &geometry, x0, &solver_cfg, cfg.batch),
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let problem = prepare_problem(cfg)?;
    if matches!(problem, Problem::Construction { .. }) && cfg.ridge > 0.0 {
        return Err(CliError::input("`ridge` applies to completion inputs only"));
    }

    let warm_rank = match cfg.rank {
        RankSpec::Fixed(n) => n,
        RankSpec::Auto => 2,
    };
    let x0 = start_point(&problem, cfg, warm_rank)?;

    let (solution, trace) = match &problem {
        Problem::Completion { obs } => {
            let objective = completion_objective(obs, cfg)?;
            run_solver(
                cfg,
                objective.as_ref(),
                &x0,
                rank_mode(cfg.rank),
                escalation(cfg.policy),
            )?
        }
        Problem::Construction { instance } => run_solver(
            cfg,
            instance.objective.as_ref(),
            &x0,
            rank_mode(cfg.rank),
            escalation(cfg.policy),
        )?,
    };

    // Spectrum report at the computed optimum, against the solved objective.
    let (m, n) = match &problem {
        Problem::Completion { obs } => (obs.rows(), obs.cols()),
        Problem::Construction { instance } => (instance.xstar.rows(), instance.xstar.cols()),
    };
    let depth = cfg.depth.clamp(1, m.min(n));
    let spectrum = match &problem {
        Problem::Completion { obs } => {
            let objective = completion_objective(obs, cfg)?;
            spectrum_report(&solution, objective.as_ref(), depth, COMPUTED_REL_TOL)?
        }
        Problem::Construction { instance } => spectrum_report(
            &solution,
            instance.objective.as_ref(),
            depth,
            COMPUTED_REL_TOL,
        )?,
    };

    let minimal_certified_rank = match cfg.rank {
        RankSpec::Fixed(r) => trace.all_certified().then_some(r),
        RankSpec::Auto => minimal_certified_rank(cfg, &problem, &trace, m.min(n))?,
    };

    let mse = match &problem {
        Problem::Completion { obs } => Some(trace.final_objective() / obs.len() as f64),
        Problem::Construction { .. } => None,
    };

    let report = ExperimentReport {
        dataset: cfg.dataset_id(),
        tau: cfg.tau,
        solver: cfg.solver.to_string(),
        xstar_rank: solution.numerical_rank(1e-10),
        top_multiplicity: spectrum.top_multiplicity,
        spectral_gap: spectrum.gaps.first().map(|g| g.gap),
        minimal_certified_rank,
        mse,
        final_objective: trace.final_objective(),
        iterations: trace.len().saturating_sub(1),
        dual_gap_at_stop: trace.final_gap(),
        converged: trace.converged,
        all_certified: trace.all_certified(),
        max_svd_rank: trace.max_svd_rank(),
    };

    Ok(ExperimentOutcome {
        report,
        log: trace.records.iter().map(LogRecord::from).collect(),
        solution,
    })
}

/// Binary search for the smallest fixed rank whose re-run (with the error
/// policy, and the warm start rebuilt at that rank for completion inputs)
/// certifies every iteration, seeded by the auto run's maximum.
fn minimal_certified_rank(
    cfg: &ExperimentConfig,
    problem: &Problem,
    auto_trace: &SolverTrace,
    dim: usize,
) -> Result<Option<usize>> {
    let attempt = |r: usize| -> Result<bool> {
        let x0 = start_point(problem, cfg, r)?;
        let outcome = match problem {
            Problem::Completion { obs } => {
                let objective = completion_objective(obs, cfg)?;
                run_solver(cfg, objective.as_ref(), &x0, RankMode::Fixed(r), EscalationPolicy::Error)
            }
            Problem::Construction { instance } => run_solver(
                cfg,
                instance.objective.as_ref(),
                &x0,
                RankMode::Fixed(r),
                EscalationPolicy::Error,
            ),
        };
        match outcome {
            Ok((_, trace)) => Ok(trace.all_certified()),
            Err(certproj::CertProjError::SolverCertificate { .. })
            | Err(certproj::CertProjError::CertificateFailed { .. }) => Ok(false),
            Err(e) => Err(e.into()),
        }
    };

    let mut hi = auto_trace.max_svd_rank().saturating_sub(1).clamp(1, dim);
    while !attempt(hi)? {
        if hi >= dim {
            return Ok(None);
        }
        hi = (hi * 2).min(dim);
    }
    let mut lo = 1usize;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if attempt(mid)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(Some(hi))
}

/// `<prefix>.<suffix>` without `Path::with_extension`'s stripping of dotted
/// prefixes.
pub fn output_path(prefix: &Path, suffix: &str) -> std::path::PathBuf {
    let mut name = prefix.as_os_str().to_os_string();
    name.push(".");
    name.push(suffix);
    std::path::PathBuf::from(name)
}

pub fn write_outputs(cfg: &ExperimentConfig, outcome: &ExperimentOutcome) -> Result<()> {
    let report_path = output_path(&cfg.out, "report.json");
    let json = serde_json::to_string_pretty(&outcome.report)
        .map_err(|e| CliError::input(format!("report serialization failed: {e}")))?;
    write_file(&report_path, format!("{json}\n").as_bytes())?;

    let log_path = output_path(&cfg.out, "iters.jsonl");
    let mut buffer = Vec::new();
    for record in &outcome.log {
        serde_json::to_writer(&mut buffer, record)
            .map_err(|e| CliError::input(format!("log serialization failed: {e}")))?;
        buffer.push(b'\n');
    }
    write_file(&log_path, &buffer)?;

    if cfg.csv {
        let csv_path = output_path(&cfg.out, "iters.csv");
        let mut csv = String::from("t,f,dual_gap,iterate_rank,rank_used,certified,elapsed_ms\n");
        for r in &outcome.log {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.t, r.f, r.dual_gap, r.iterate_rank, r.rank_used, r.certified, r.elapsed_ms
            ));
        }
        write_file(&csv_path, csv.as_bytes())?;
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::io(parent.display().to_string(), e))?;
        }
    }
    let mut file = std::fs::File::create(path)
        .map_err(|e| CliError::io(path.display().to_string(), e))?;
    file.write_all(bytes)
        .map_err(|e| CliError::io(path.display().to_string(), e))
}
