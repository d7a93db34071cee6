//! End-to-end harness behavior: experiments over constructions and planted
//! completions, minimal-rank semantics, reproducibility, config handling,
//! and process-level exit codes.

use certproj_cli::config::{write_fixture, ConstructionSpec, Settings};
use certproj_cli::experiment::output_path;
use certproj_cli::{run_experiment, CliError};
use std::process::Command;

fn resolve(pairs: &[(&str, &str)]) -> certproj_cli::ExperimentConfig {
    let mut settings = Settings::default();
    for (k, v) in pairs {
        settings.set(k, v).unwrap();
    }
    settings.resolve().unwrap()
}

#[test]
fn tightness_experiment_certifies_at_the_multiplicity() {
    let cfg = resolve(&[
        ("construction", "tightness(n=6,r=2,sigma=0.3,beta=1,a=0.2)"),
        ("tau", "1"),
        ("solver", "pgd"),
        ("tol", "1e-8"),
    ]);
    let outcome = run_experiment(&cfg).unwrap();
    let report = &outcome.report;
    assert!(report.converged);
    assert!(report.all_certified);
    assert_eq!(report.xstar_rank, 2);
    assert_eq!(report.top_multiplicity, 2);
    assert_eq!(report.minimal_certified_rank, Some(2));
    assert!((report.spectral_gap.unwrap() - 0.3).abs() < 1e-6);
    assert_eq!(outcome.log.len(), report.iterations + 1);
}

#[test]
fn below_minimal_rank_fails_certification_under_error_policy() {
    let cfg = resolve(&[
        ("construction", "tightness(n=6,r=2,sigma=0.3,beta=1,a=0.2)"),
        ("tau", "1"),
        ("solver", "pgd"),
        ("tol", "1e-8"),
        ("rank", "1"),
        ("policy", "error"),
    ]);
    let err = match run_experiment(&cfg) {
        Err(e) => e,
        Ok(_) => panic!("expected a certificate failure"),
    };
    assert_eq!(err.exit_code(), 2, "expected a certificate failure: {err}");
}

#[test]
fn planted_tight_regime_recovers_rank_and_multiplicity() {
    let cfg = resolve(&[
        (
            "construction",
            "planted(m=20,n=20,k=2,density=0.5,gt-norm=3,seed=1)",
        ),
        ("tau", "1"),
        ("solver", "pgd"),
        ("tol", "1e-7"),
        ("max-iters", "30000"),
    ]);
    let outcome = run_experiment(&cfg).unwrap();
    let report = &outcome.report;
    assert!(report.converged, "gap stalled at {:.3e}", report.dual_gap_at_stop);
    assert_eq!(report.xstar_rank, 2);
    assert_eq!(report.top_multiplicity, 2);
    assert_eq!(report.minimal_certified_rank, Some(2));
    assert!(report.mse.is_some());
}

#[test]
fn reports_are_reproducible_byte_for_byte() {
    let cfg = resolve(&[
        ("construction", "rank-lb(n=6,r=2,a=0.1,sigma=0.3)"),
        ("tau", "1"),
        ("solver", "agd"),
        ("tol", "1e-7"),
        ("seed", "7"),
    ]);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    let ja = serde_json::to_string(&a.report).unwrap();
    let jb = serde_json::to_string(&b.report).unwrap();
    assert_eq!(ja, jb);
    // Iteration logs match too, apart from wall-clock fields.
    assert_eq!(a.log.len(), b.log.len());
    for (ra, rb) in a.log.iter().zip(&b.log) {
        assert_eq!(ra.f.to_bits(), rb.f.to_bits());
        assert_eq!(ra.dual_gap.to_bits(), rb.dual_gap.to_bits());
        assert_eq!(ra.iterate_rank, rb.iterate_rank);
    }
}

#[test]
fn sgd_and_prox_run_through_the_harness() {
    let sgd_cfg = resolve(&[
        (
            "construction",
            "planted(m=10,n=10,k=2,density=0.8,gt-norm=1.2,seed=5)",
        ),
        ("tau", "1"),
        ("solver", "sgd"),
        ("batch", "256"),
        ("tol", "0.05"),
        ("max-iters", "400"),
    ]);
    let outcome = run_experiment(&sgd_cfg).unwrap();
    assert!(outcome.report.converged);

    let prox_cfg = resolve(&[
        (
            "construction",
            "planted(m=10,n=10,k=2,density=0.8,gt-norm=8,seed=5)",
        ),
        ("tau", "8"),
        ("solver", "prox"),
        ("tol", "1e-4"),
        ("max-iters", "3000"),
    ]);
    let outcome = run_experiment(&prox_cfg).unwrap();
    assert!(outcome.report.converged);
    assert!(outcome.report.all_certified);
}

#[test]
fn ridge_enables_the_strongly_convex_solver() {
    let base = [
        (
            "construction",
            "planted(m=12,n=12,k=2,density=0.7,gt-norm=1.3,seed=3)",
        ),
        ("tau", "1"),
        ("solver", "agd-sc"),
        ("tol", "1e-6"),
        ("max-iters", "5000"),
    ];
    // Without ridge the completion objective has no strong convexity.
    let cfg = resolve(&base);
    assert!(run_experiment(&cfg).is_err());

    let mut with_ridge = base.to_vec();
    with_ridge.push(("ridge", "0.05"));
    let outcome = run_experiment(&resolve(&with_ridge)).unwrap();
    assert!(outcome.report.converged);
    assert!(outcome.report.all_certified);
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_certproj"))
}

#[test]
fn binary_exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");

    // Success.
    let status = binary()
        .args([
            "--construction",
            "tightness(n=6,r=2,sigma=0.3,beta=1,a=0.2)",
            "--tau",
            "1",
            "--solver",
            "pgd",
            "--tol",
            "1e-6",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(output_path(&out, "report.json").exists());
    assert!(output_path(&out, "iters.jsonl").exists());

    // Certificate failure under the error policy.
    let status = binary()
        .args([
            "--construction",
            "tightness(n=6,r=2,sigma=0.3,beta=1,a=0.2)",
            "--tau",
            "1",
            "--solver",
            "pgd",
            "--rank",
            "1",
            "--policy",
            "error",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // Input error: no tau.
    let status = binary()
        .args(["--construction", "tightness(n=6,r=2,sigma=0.3,a=0.2)", "--solver", "pgd"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));

    // Cap hit with the gap above tolerance.
    let status = binary()
        .args([
            "--construction",
            "planted(m=12,n=12,k=3,density=0.6,gt-norm=1.5,seed=1)",
            "--tau",
            "1",
            "--solver",
            "pgd",
            "--tol",
            "1e-12",
            "--max-iters",
            "3",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));
}

#[test]
fn binary_reads_config_files_with_flag_overrides_and_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let fixture_path = dir.path().join("instance.fixture");
    let spec: ConstructionSpec = "rank-lb(n=6,r=2,a=0.1,sigma=0.3)".parse().unwrap();
    std::fs::write(&fixture_path, write_fixture(&spec)).unwrap();

    let config_path = dir.path().join("run.conf");
    let out = dir.path().join("fixture-run");
    std::fs::write(
        &config_path,
        format!(
            "input={}\ntau=1\nsolver=pgd\ntol=1e-2\nout={}\n",
            fixture_path.display(),
            out.display()
        ),
    )
    .unwrap();

    let status = binary()
        .args([
            "--config",
            config_path.to_str().unwrap(),
            "--tol",
            "1e-7", // overrides the file's 1e-2
            "--csv",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(output_path(&out, "report.json")).unwrap())
            .unwrap();
    assert!(report["dual_gap_at_stop"].as_f64().unwrap() <= 1e-7);
    assert_eq!(report["xstar_rank"].as_u64().unwrap(), 2);
    let csv = std::fs::read_to_string(output_path(&out, "iters.csv")).unwrap();
    assert!(csv.starts_with("t,f,dual_gap,iterate_rank,rank_used,certified,elapsed_ms"));
}

#[test]
fn sweep_runs_configs_concurrently_with_isolated_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut config_paths = Vec::new();
    for (i, sigma) in [0.3, 0.5].iter().enumerate() {
        let out = dir.path().join(format!("sweep-{i}"));
        let path = dir.path().join(format!("sweep-{i}.conf"));
        std::fs::write(
            &path,
            format!(
                "construction=tightness(n=6,r=2,sigma={sigma},beta=1,a=0.2)\n\
                 tau=1\nsolver=pgd\ntol=1e-6\nseed={i}\nout={}\n",
                out.display()
            ),
        )
        .unwrap();
        config_paths.push((path, out));
    }
    let listing = dir.path().join("sweep.txt");
    std::fs::write(
        &listing,
        config_paths
            .iter()
            .map(|(p, _)| p.display().to_string())
            .collect::<Vec<_>>()
            .join("\n"),
    )
    .unwrap();

    let status = binary()
        .args(["--sweep", listing.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for (_, out) in &config_paths {
        assert!(output_path(&out, "report.json").exists());
    }
}

#[test]
fn mse_is_final_objective_over_observation_count() {
    let cfg = resolve(&[
        (
            "construction",
            "planted(m=10,n=10,k=2,density=1.0,gt-norm=1.2,seed=11,noise=0.1)",
        ),
        ("tau", "1"),
        ("solver", "pgd"),
        ("tol", "1e-6"),
        ("max-iters", "10000"),
    ]);
    let outcome = run_experiment(&cfg).unwrap();
    let report = &outcome.report;
    let expected = report.final_objective / 100.0;
    assert!((report.mse.unwrap() - expected).abs() <= f64::EPSILON * expected.abs().max(1.0));
}

#[test]
fn dataset_ingestion_feeds_the_harness() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("ratings.tsv");
    // A tiny, fully observed 4 x 4 low-rank table (1-based ids).
    let mut lines = String::new();
    for i in 1..=4 {
        for j in 1..=4 {
            let value = (i as f64) * 0.2 + (j as f64) * 0.1;
            lines.push_str(&format!("{i}\t{j}\t{value}\t0\n"));
        }
    }
    std::fs::write(&data, lines).unwrap();

    let cfg = resolve(&[
        ("input", data.to_str().unwrap()),
        ("tau", "1.5"),
        ("solver", "pgd"),
        ("tol", "1e-7"),
        ("max-iters", "5000"),
    ]);
    let outcome = run_experiment(&cfg).unwrap();
    assert!(outcome.report.converged);
    assert_eq!(outcome.report.dataset, "ratings");
    assert!(outcome.report.mse.is_some());
    let _ = CliError::input("constructor is part of the public surface");
}
