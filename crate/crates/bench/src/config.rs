//! Experiment configuration: a flat `key = value` document or a JSON object
//! with the same keys. Every key can also be set from the command line.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use proxsvrg::data::LabelMode;
use proxsvrg::optimizers::StepSchedule;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// Sparse linear model with the l1 penalty.
    Lasso,
    /// Group-sparse linear model with the group penalty.
    Group,
    /// Errors-in-variables model with the corrected quadratic loss.
    Corrected,
    Scad,
    Mcp,
    /// Dataset read from `data`.
    File,
}

impl FromStr for ProblemKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "lasso" => Self::Lasso,
            "group" => Self::Group,
            "corrected" => Self::Corrected,
            "scad" => Self::Scad,
            "mcp" => Self::Mcp,
            "file" => Self::File,
            _ => return Err(BenchError::validation(format!("unknown problem `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverName {
    Svrg,
    Sag,
    CompositeGradient,
    Sgd,
    Rda,
}

impl SolverName {
    pub const ALL: [SolverName; 5] = [
        SolverName::Svrg,
        SolverName::Sag,
        SolverName::CompositeGradient,
        SolverName::Sgd,
        SolverName::Rda,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SolverName::Svrg => "svrg",
            SolverName::Sag => "sag",
            SolverName::CompositeGradient => "composite_gradient",
            SolverName::Sgd => "sgd",
            SolverName::Rda => "rda",
        }
    }

    /// Solvers whose step size is a single constant and can be grid-tuned.
    pub fn constant_rate(self) -> bool {
        matches!(self, SolverName::Svrg | SolverName::Sag | SolverName::CompositeGradient)
    }
}

impl fmt::Display for SolverName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverName {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "svrg" => Self::Svrg,
            "sag" => Self::Sag,
            "composite_gradient" | "gd" => Self::CompositeGradient,
            "sgd" => Self::Sgd,
            "rda" => Self::Rda,
            _ => return Err(BenchError::validation(format!("unknown solver `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossName {
    Squared,
    Logistic,
    Corrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerName {
    L1,
    Group,
    Scad,
    Mcp,
}

/// Preprocessing of file datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preprocess {
    #[default]
    None,
    /// Standardize, then expand every feature into the group `(x, x^2, x^3)`.
    Poly3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFormatName {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub n: usize,
    pub p: usize,
    /// Planted nonzeros (nonzero groups for `group`).
    pub r: usize,
    pub b: f64,
    pub variance: f64,
    /// Response noise standard deviation.
    pub noise: f64,
    /// Covariate noise variance of the corrected model.
    pub gamma_w: f64,
    pub group_size: Option<usize>,
    pub num_groups: Option<usize>,
    /// SCAD `zeta` or MCP `b`.
    pub shape: f64,
    /// Seed of the synthetic design; defaults to `seed`.
    pub data_seed: Option<u64>,

    pub data: Option<PathBuf>,
    pub loss: Option<LossName>,
    pub regularizer: Option<RegularizerName>,
    pub labels: LabelMode,
    pub preprocess: Preprocess,

    pub lambda: Option<f64>,
    pub rho: Option<f64>,

    pub solvers: Vec<SolverName>,
    pub m: Option<usize>,
    pub beta: f64,
    /// Per-solver step sizes overriding `beta`.
    pub betas: BTreeMap<SolverName, f64>,
    /// Budget in effective passes for every solver.
    pub epochs: usize,
    pub seed: u64,
    pub eval_every: usize,
    pub rda_gamma: f64,
    pub sgd_schedule: StepSchedule,
    pub divergence_factor: f64,

    /// Minimum effective passes of the reference run.
    pub reference_passes: usize,
    pub reference_beta: Option<f64>,

    pub normalize: bool,
    pub timing: bool,
    pub grid: bool,
    pub trace_format: TraceFormatName,

    pub phase_r: Vec<usize>,
    pub fit_start: f64,
    pub fit_end: f64,
    pub gap_floor: f64,
    pub linear_threshold: f64,

    pub c1: f64,
    pub tau: f64,
    pub rsc_trials: usize,
    pub kappa_sq: Option<f64>,
    pub diag_beta: Option<f64>,
    pub diag_m: Option<usize>,

    pub out: PathBuf,
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Lasso,
            n: 2500,
            p: 5000,
            r: 50,
            b: 0.0,
            variance: 1.0,
            noise: 1.0,
            gamma_w: 0.0,
            group_size: None,
            num_groups: None,
            shape: 3.7,
            data_seed: None,
            data: None,
            loss: None,
            regularizer: None,
            labels: LabelMode::Binary,
            preprocess: Preprocess::None,
            lambda: None,
            rho: None,
            solvers: vec![SolverName::Svrg],
            m: None,
            beta: 1.0 / 1024.0,
            betas: BTreeMap::new(),
            epochs: 100,
            seed: 1,
            eval_every: 1,
            rda_gamma: 1.0,
            sgd_schedule: StepSchedule::Decaying,
            divergence_factor: 1e3,
            reference_passes: 500,
            reference_beta: None,
            normalize: true,
            timing: false,
            grid: false,
            trace_format: TraceFormatName::Csv,
            phase_r: Vec::new(),
            fit_start: 5.0,
            fit_end: 50.0,
            gap_floor: 1e-12,
            linear_threshold: 0.995,
            c1: 1.0,
            tau: 1.0,
            rsc_trials: 200,
            kappa_sq: None,
            diag_beta: None,
            diag_m: None,
            out: PathBuf::from("out"),
            workers: 1,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| BenchError::validation(format!("bad value `{value}` for `{key}`")))
}

fn parse_switch(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(BenchError::validation(format!("`{key}` expects on/off, got `{value}`"))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

/// Parses a snake_case enum value through serde.
fn parse_enum<T: for<'de> Deserialize<'de>>(key: &str, value: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| BenchError::validation(format!("bad value `{value}` for `{key}`")))
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value.is_empty() || value == "none" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

impl ExperimentConfig {
    /// Loads a config file. Files starting with `{` are JSON, anything else is
    /// read as `key = value` lines (`#` starts a comment).
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| BenchError::validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            return serde_json::from_str(text).map_err(|e| BenchError::validation(format!("config: {e}")));
        }
        let mut cfg = Self::default();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| BenchError::validation(format!("config line {}: expected key = value", k + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| BenchError::validation(format!("config line {}: {e}", k + 1)))?;
        }
        Ok(cfg)
    }

    /// Sets one key from its textual value. `beta.<solver>` sets a per-solver
    /// step size.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if let Some(solver) = key.strip_prefix("beta.") {
            let s: SolverName = solver.parse()?;
            self.betas.insert(s, parse(key, value)?);
            return Ok(());
        }
        match key {
            "problem" => self.problem = value.parse()?,
            "n" => self.n = parse(key, value)?,
            "p" => self.p = parse(key, value)?,
            "r" => self.r = parse(key, value)?,
            "b" => self.b = parse(key, value)?,
            "variance" => self.variance = parse(key, value)?,
            "noise" => self.noise = parse(key, value)?,
            "gamma_w" => self.gamma_w = parse(key, value)?,
            "group_size" => self.group_size = optional(key, value)?,
            "num_groups" => self.num_groups = optional(key, value)?,
            "shape" => self.shape = parse(key, value)?,
            "data_seed" => self.data_seed = optional(key, value)?,
            "data" => self.data = optional(key, value)?,
            "loss" => self.loss = Some(parse_enum(key, value)?),
            "regularizer" => self.regularizer = Some(parse_enum(key, value)?),
            "labels" => self.labels = parse_enum(key, value)?,
            "preprocess" => self.preprocess = parse_enum(key, value)?,
            "lambda" => self.lambda = optional(key, value)?,
            "rho" => self.rho = optional(key, value)?,
            "solvers" | "solver" => self.solvers = parse_list(key, value)?,
            "m" => self.m = optional(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "eval_every" => self.eval_every = parse(key, value)?,
            "rda_gamma" => self.rda_gamma = parse(key, value)?,
            "sgd_schedule" => self.sgd_schedule = parse_enum(key, value)?,
            "divergence_factor" => self.divergence_factor = parse(key, value)?,
            "reference_passes" => self.reference_passes = parse(key, value)?,
            "reference_beta" => self.reference_beta = optional(key, value)?,
            "normalize" => self.normalize = parse_switch(key, value)?,
            "timing" => self.timing = parse_switch(key, value)?,
            "grid" => self.grid = parse_switch(key, value)?,
            "trace_format" => self.trace_format = parse_enum(key, value)?,
            "phase_r" => self.phase_r = parse_list(key, value)?,
            "fit_start" => self.fit_start = parse(key, value)?,
            "fit_end" => self.fit_end = parse(key, value)?,
            "gap_floor" => self.gap_floor = parse(key, value)?,
            "linear_threshold" => self.linear_threshold = parse(key, value)?,
            "c1" => self.c1 = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "rsc_trials" => self.rsc_trials = parse(key, value)?,
            "kappa_sq" => self.kappa_sq = optional(key, value)?,
            "diag_beta" => self.diag_beta = optional(key, value)?,
            "diag_m" => self.diag_m = optional(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "workers" => self.workers = parse(key, value)?,
            _ => return Err(BenchError::validation(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn data_seed(&self) -> u64 {
        self.data_seed.unwrap_or(self.seed)
    }

    /// Step size of `solver`.
    pub fn beta_for(&self, solver: SolverName) -> f64 {
        self.betas.get(&solver).copied().unwrap_or(self.beta)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::validation(m));
        if self.solvers.is_empty() {
            return bad("at least one solver is required".into());
        }
        if self.epochs == 0 || self.eval_every == 0 {
            return bad("epochs and eval_every must be >= 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be >= 1".into());
        }
        if self.m == Some(0) {
            return bad("m must be >= 1".into());
        }
        for (name, b) in std::iter::once(("beta", self.beta)).chain(self.betas.values().map(|&b| ("beta.<solver>", b))) {
            if !(b > 0.0) || !b.is_finite() {
                return bad(format!("{name} must be finite and > 0, got {b}"));
            }
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0) || !l.is_finite() {
                return bad(format!("lambda must be finite and >= 0, got {l}"));
            }
        }
        if let Some(r) = self.rho {
            if !(r > 0.0) {
                return bad(format!("rho must be > 0, got {r}"));
            }
        }
        if !(self.fit_end > self.fit_start) {
            return bad("fit_end must exceed fit_start".into());
        }
        if self.problem == ProblemKind::File {
            if self.data.is_none() {
                return bad("problem = file needs `data`".into());
            }
        } else if self.n == 0 || self.p == 0 {
            return bad("n and p must be >= 1".into());
        }
        Ok(())
    }

    /// The config with the keys that do not affect results (`out`,
    /// `workers`) reset. Hashes and manifests are built from this view.
    pub fn canonical(&self) -> Self {
        let d = Self::default();
        Self {
            out: d.out,
            workers: d.workers,
            ..self.clone()
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.canonical()).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Artifact file prefix: the first 12 hex digits of [`Self::hash`].
    pub fn tag(&self) -> String {
        self.hash()[..12].to_string()
    }
}
