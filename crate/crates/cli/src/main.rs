//! Command-line experiment harness.
//!
//! Exit codes: 0 success; 2 certification failure under the error policy;
//! 3 input error; 4 iteration cap hit with the dual gap above tolerance.

use certproj_cli::config::{Settings, KNOWN_KEYS};
use certproj_cli::{run_experiment, CliError};
use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "certproj",
    about = "Trace-norm optimization experiments with runtime-certified low-rank projections",
    after_help = "Every flag mirrors a config-file key (see --config); flags win over file values."
)]
struct Args {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Ratings file (MovieLens u.data style) or construction fixture file.
    #[arg(long)]
    input: Option<String>,

    /// Construction spec, e.g. "tightness(n=6,r=2,sigma=0.3,beta=1,a=0.2)".
    #[arg(long)]
    construction: Option<String>,

    /// Trace-norm ball radius.
    #[arg(long)]
    tau: Option<String>,

    /// Solver: pgd | agd-sc | agd | prox | sgd.
    #[arg(long)]
    solver: Option<String>,

    /// SVD rank: a number or "auto".
    #[arg(long)]
    rank: Option<String>,

    /// Certificate-failure policy: error | escalate | exact.
    #[arg(long)]
    policy: Option<String>,

    /// Step size (default 1/beta).
    #[arg(long)]
    eta: Option<String>,

    /// Dual-gap stopping tolerance (default 0.01).
    #[arg(long)]
    tol: Option<String>,

    #[arg(long = "max-iters")]
    max_iters: Option<String>,

    #[arg(long)]
    seed: Option<String>,

    /// Ridge coefficient added to completion objectives.
    #[arg(long)]
    ridge: Option<String>,

    /// Mini-batch size for sgd.
    #[arg(long)]
    batch: Option<String>,

    /// Spectrum report depth.
    #[arg(long)]
    depth: Option<String>,

    /// Output path prefix (writes <out>.report.json and <out>.iters.jsonl).
    #[arg(long)]
    out: Option<String>,

    /// Also write the iteration log as CSV.
    #[arg(long)]
    csv: bool,

    /// File listing config files to run concurrently (one per line); the
    /// other flags overlay each of them.
    #[arg(long)]
    sweep: Option<PathBuf>,
}

impl Args {
    fn as_settings(&self) -> Result<Settings, CliError> {
        let mut settings = Settings::default();
        let pairs: [(&str, Option<&String>); 13] = [
            ("input", self.input.as_ref()),
            ("construction", self.construction.as_ref()),
            ("tau", self.tau.as_ref()),
            ("solver", self.solver.as_ref()),
            ("rank", self.rank.as_ref()),
            ("policy", self.policy.as_ref()),
            ("eta", self.eta.as_ref()),
            ("tol", self.tol.as_ref()),
            ("max-iters", self.max_iters.as_ref()),
            ("seed", self.seed.as_ref()),
            ("ridge", self.ridge.as_ref()),
            ("batch", self.batch.as_ref()),
            ("depth", self.depth.as_ref()),
        ];
        for (key, value) in pairs {
            debug_assert!(KNOWN_KEYS.contains(&key));
            if let Some(value) = value {
                settings.set(key, value)?;
            }
        }
        if let Some(out) = &self.out {
            settings.set("out", out)?;
        }
        if self.csv {
            settings.set("csv", "true")?;
        }
        Ok(settings)
    }
}

fn run_single(file: Option<&PathBuf>, flags: &Settings) -> Result<i32, CliError> {
    let mut settings = match file {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    settings = settings.overlaid(flags.clone());
    let cfg = settings.resolve()?;
    let outcome = run_experiment(&cfg)?;
    certproj_cli::experiment::write_outputs(&cfg, &outcome)?;

    let report = &outcome.report;
    println!(
        "{}: solver {} | rank(X*) {} | multiplicity {} | minimal rank {} | \
         mse {} | gap-at-stop {:.3e} | {} iterations{}",
        report.dataset,
        report.solver,
        report.xstar_rank,
        report.top_multiplicity,
        report
            .minimal_certified_rank
            .map_or_else(|| "-".into(), |r| r.to_string()),
        report.mse.map_or_else(|| "-".into(), |m| format!("{m:.4}")),
        report.dual_gap_at_stop,
        report.iterations,
        if report.converged { "" } else { " (cap hit)" },
    );
    println!(
        "wrote {} and {}",
        certproj_cli::experiment::output_path(&cfg.out, "report.json").display(),
        certproj_cli::experiment::output_path(&cfg.out, "iters.jsonl").display()
    );
    Ok(if report.converged { 0 } else { 4 })
}

fn main() -> ExitCode {
    let args = Args::parse();
    let flags = match args.as_settings() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    };

    if let Some(sweep_file) = &args.sweep {
        let listing = match std::fs::read_to_string(sweep_file) {
            Ok(text) => text,
            Err(e) => {
                eprintln!("error: cannot read sweep file: {e}");
                return ExitCode::from(3);
            }
        };
        let configs: Vec<PathBuf> = listing
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(PathBuf::from)
            .collect();
        if configs.is_empty() {
            eprintln!("error: sweep file lists no configs");
            return ExitCode::from(3);
        }
        let handles: Vec<_> = configs
            .into_iter()
            .map(|path| {
                let flags = flags.clone();
                std::thread::spawn(move || match run_single(Some(&path), &flags) {
                    Ok(code) => code,
                    Err(e) => {
                        eprintln!("error in {}: {e}", path.display());
                        e.exit_code()
                    }
                })
            })
            .collect();
        let worst = handles
            .into_iter()
            .map(|h| h.join().unwrap_or(3))
            .max()
            .unwrap_or(0);
        return ExitCode::from(worst as u8);
    }

    match run_single(args.config.as_ref(), &flags) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
