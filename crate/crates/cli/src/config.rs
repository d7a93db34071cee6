//! Experiment configuration: a flat key-value config file where every key
//! can be overridden by a command-line flag of the same name (flags win),
//! plus the construction-spec and fixture-file parsers.

use crate::{CliError, Result};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Pgd,
    AgdSc,
    Agd,
    Prox,
    Sgd,
}

impl FromStr for SolverKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pgd" => Ok(SolverKind::Pgd),
            "agd-sc" => Ok(SolverKind::AgdSc),
            "agd" => Ok(SolverKind::Agd),
            "prox" => Ok(SolverKind::Prox),
            "sgd" => Ok(SolverKind::Sgd),
            other => Err(CliError::input(format!(
                "unknown solver `{other}` (expected pgd|agd-sc|agd|prox|sgd)"
            ))),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SolverKind::Pgd => "pgd",
            SolverKind::AgdSc => "agd-sc",
            SolverKind::Agd => "agd",
            SolverKind::Prox => "prox",
            SolverKind::Sgd => "sgd",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankSpec {
    Auto,
    Fixed(usize),
}

impl FromStr for RankSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(RankSpec::Auto);
        }
        let n: usize = s
            .parse()
            .map_err(|_| CliError::input(format!("bad rank `{s}` (expected a number or `auto`)")))?;
        if n == 0 {
            return Err(CliError::input("rank must be at least 1"));
        }
        Ok(RankSpec::Fixed(n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicySpec {
    Error,
    Escalate,
    Exact,
}

impl FromStr for PolicySpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error" => Ok(PolicySpec::Error),
            "escalate" => Ok(PolicySpec::Escalate),
            "exact" => Ok(PolicySpec::Exact),
            other => Err(CliError::input(format!(
                "unknown policy `{other}` (expected error|escalate|exact)"
            ))),
        }
    }
}

/// `name(key=value, ...)` construction descriptor, e.g.
/// `tightness(n=6, r=2, sigma=0.3, beta=1, a=0.2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstructionSpec {
    pub kind: String,
    pub params: BTreeMap<String, f64>,
}

impl ConstructionSpec {
    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    pub fn require(&self, key: &str) -> Result<f64> {
        self.param(key).ok_or_else(|| {
            CliError::input(format!(
                "construction `{}` is missing parameter `{key}`",
                self.kind
            ))
        })
    }
}

impl FromStr for ConstructionSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, rest) = match s.find('(') {
            Some(open) => {
                if !s.ends_with(')') {
                    return Err(CliError::input(format!(
                        "construction `{s}`: missing closing parenthesis"
                    )));
                }
                (&s[..open], &s[open + 1..s.len() - 1])
            }
            None => (s, ""),
        };
        if kind.is_empty() {
            return Err(CliError::input("empty construction name"));
        }
        let mut params = BTreeMap::new();
        for piece in rest.split(',') {
            let piece = piece.trim();
            if piece.is_empty() {
                continue;
            }
            let (key, value) = piece.split_once('=').ok_or_else(|| {
                CliError::input(format!("construction parameter `{piece}` is not key=value"))
            })?;
            let value: f64 = value.trim().parse().map_err(|_| {
                CliError::input(format!("construction parameter `{piece}`: bad number"))
            })?;
            params.insert(key.trim().to_string(), value);
        }
        Ok(ConstructionSpec {
            kind: kind.to_string(),
            params,
        })
    }
}

impl fmt::Display for ConstructionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.kind)?;
        for (i, (k, v)) in self.params.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    /// MovieLens-format ratings file, or a construction fixture file
    /// (detected by a leading `kind=` line).
    Dataset(PathBuf),
    Construction(ConstructionSpec),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub input: InputSource,
    /// Trace-norm ball radius.
    pub tau: f64,
    pub solver: SolverKind,
    pub rank: RankSpec,
    pub policy: PolicySpec,
    /// Step size override; default 1/beta.
    pub eta: Option<f64>,
    /// Dual-gap stopping tolerance.
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Ridge coefficient added to completion objectives (needed by agd-sc).
    pub ridge: f64,
    /// Mini-batch size for sgd.
    pub batch: usize,
    /// Spectrum report depth.
    pub depth: usize,
    /// Output path prefix.
    pub out: PathBuf,
    /// Also write the iteration log as CSV.
    pub csv: bool,
}

impl ExperimentConfig {
    pub fn dataset_id(&self) -> String {
        match &self.input {
            InputSource::Dataset(path) => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
            InputSource::Construction(spec) => spec.to_string(),
        }
    }
}

/// Raw key-value settings collected from a config file and/or flags.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

pub const KNOWN_KEYS: &[&str] = &[
    "input", "construction", "tau", "solver", "rank", "policy", "eta", "tol", "max-iters",
    "seed", "ridge", "batch", "depth", "out", "csv",
];

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(path.display().to_string(), e))?;
        let mut settings = Settings::default();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::input(format!(
                    "{}: line {}: expected key=value",
                    path.display(),
                    idx + 1
                ))
            })?;
            settings.set(key.trim(), value.trim())?;
        }
        Ok(settings)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(CliError::input(format!(
                "unknown configuration key `{key}` (known: {})",
                KNOWN_KEYS.join(", ")
            )));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Overlays `other` on top of `self` (the overlay wins).
    pub fn overlaid(mut self, other: Settings) -> Settings {
        self.values.extend(other.values);
        self
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                CliError::input(format!("configuration key `{key}` = `{raw}`: {e}"))
            }),
        }
    }

    /// Resolves the final experiment configuration, applying defaults.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let input = match (self.get("input"), self.get("construction")) {
            (Some(_), Some(_)) => {
                return Err(CliError::input(
                    "exactly one of `input` and `construction` must be set, got both",
                ))
            }
            (Some(path), None) => InputSource::Dataset(PathBuf::from(path)),
            (None, Some(spec)) => InputSource::Construction(spec.parse()?),
            (None, None) => {
                return Err(CliError::input(
                    "exactly one of `input` and `construction` must be set",
                ))
            }
        };
        let tau: f64 = self
            .parse("tau")?
            .ok_or_else(|| CliError::input("`tau` is required"))?;
        if tau.is_nan() || tau <= 0.0 {
            return Err(CliError::input("`tau` must be positive"));
        }
        let solver: SolverKind = self
            .parse::<String>("solver")?
            .ok_or_else(|| CliError::input("`solver` is required"))?
            .parse()?;
        let rank = match self.get("rank") {
            None => RankSpec::Auto,
            Some(raw) => raw.parse()?,
        };
        let policy = match self.get("policy") {
            None => PolicySpec::Escalate,
            Some(raw) => raw.parse()?,
        };
        let csv = match self.get("csv") {
            None => false,
            Some(raw) => raw.parse::<bool>().map_err(|_| {
                CliError::input(format!("configuration key `csv` = `{raw}`: expected bool"))
            })?,
        };
        Ok(ExperimentConfig {
            input,
            tau,
            solver,
            rank,
            policy,
            eta: self.parse("eta")?,
            tol: self.parse("tol")?.unwrap_or(0.01),
            max_iters: self.parse("max-iters")?.unwrap_or(5_000),
            seed: self.parse("seed")?.unwrap_or(0),
            ridge: self.parse("ridge")?.unwrap_or(0.0),
            batch: self.parse("batch")?.unwrap_or(64),
            depth: self.parse("depth")?.unwrap_or(8),
            out: PathBuf::from(self.get("out").unwrap_or("experiment")),
            csv,
        })
    }
}

/// Construction fixture files: the same flat key-value format with a `kind`
/// key, e.g. `kind=tightness`, `r=2`, `sigma=0.3`.
pub fn parse_fixture(text: &str) -> Result<ConstructionSpec> {
    let mut kind = None;
    let mut params = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::input(format!("fixture line {}: expected key=value", idx + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key == "kind" {
            kind = Some(value.to_string());
        } else {
            let v: f64 = value.parse().map_err(|_| {
                CliError::input(format!("fixture line {}: bad number for `{key}`", idx + 1))
            })?;
            params.insert(key.to_string(), v);
        }
    }
    Ok(ConstructionSpec {
        kind: kind.ok_or_else(|| CliError::input("fixture file is missing `kind`"))?,
        params,
    })
}

pub fn write_fixture(spec: &ConstructionSpec) -> String {
    let mut out = format!("kind={}\n", spec.kind);
    for (key, value) in &spec.params {
        out.push_str(&format!("{key}={value}\n"));
    }
    out
}

/// True when the file looks like a construction fixture rather than a
/// ratings table.
pub fn sniff_fixture(text: &str) -> bool {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .is_some_and(|l| l.starts_with("kind="))
}
