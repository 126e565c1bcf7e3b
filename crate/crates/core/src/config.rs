//! The JSON run-config file.
//!
//! ```json
//! {
//!   "problem": { "d": 100, "rho": 20, "noise": { "kind": "sym_pareto", "alpha": 1.2, "scale": 1 } },
//!   "method":  { "name": "rs_nsgd", "r": 4, "eta": 0.001, "u": 0, "B": 4, "q": 0, "T": 10000, "seed": 1 },
//!   "bench":   { "grid": [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1], "tune_seeds": [1, 2, 3],
//!                "eval_seeds": [101, 102, 103, 104, 105], "budget": 400000, "score_window": 10, "workers": 1 },
//!   "output":  { "dir": "out" }
//! }
//! ```
//!
//! Unknown keys are rejected. `method` is needed by `run`, `bench` by
//! `bench`. Errors name the offending field path.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::{default_methods, ExperimentSpec, MethodSpec, TuneSpec};
use crate::optim::{Method, MethodConfig};
use crate::problems::{NoiseModel, SpectrumQuadratic};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub d: usize,
    pub rho: f64,
    #[serde(default = "no_noise")]
    pub noise: NoiseModel,
}

fn no_noise() -> NoiseModel {
    NoiseModel::None
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSection {
    pub name: Method,
    pub r: usize,
    pub eta: f64,
    #[serde(default)]
    pub u: f64,
    #[serde(rename = "B", default = "one")]
    pub batch_base: f64,
    #[serde(rename = "q", default)]
    pub batch_exp: f64,
    #[serde(rename = "T")]
    pub horizon: u64,
    #[serde(default)]
    pub fixed_eta: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one_u64")]
    pub log_stride: u64,
}

fn one() -> f64 {
    1.0
}

fn one_u64() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    #[serde(default = "crate::bench::default_grid")]
    pub grid: Vec<f64>,
    pub tune_seeds: Vec<u64>,
    pub eval_seeds: Vec<u64>,
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default = "default_window")]
    pub score_window: usize,
    #[serde(default = "one_usize")]
    pub workers: usize,
    /// Defaults to `[problem.rho]`.
    #[serde(default)]
    pub rhos: Option<Vec<f64>>,
    /// Minibatch size `B̄`.
    #[serde(default = "default_batch")]
    pub batch: u64,
    /// Defaults to full-dimensional SGD/NSGD and their `r ∈ {20, 4}` variants.
    #[serde(default)]
    pub methods: Option<Vec<MethodSpec>>,
}

fn default_budget() -> u64 {
    crate::bench::DEFAULT_BUDGET
}

fn default_window() -> usize {
    10
}

fn one_usize() -> usize {
    1
}

fn default_batch() -> u64 {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from(".") }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    #[serde(default)]
    pub method: Option<MethodSection>,
    #[serde(default)]
    pub bench: Option<BenchSection>,
    #[serde(default)]
    pub output: OutputSection,
}

fn prefixed(prefix: &str, e: Error) -> Error {
    match e {
        Error::Config { path, msg } => Error::Config {
            path: format!("{prefix}.{path}"),
            msg,
        },
        other => Error::config(prefix, other.to_string()),
    }
}

impl RunConfig {
    /// Parses and validates a config document.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(s);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { String::new() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.problem()?;
        if let Some(m) = &self.method {
            m.to_config().validate(self.problem.d).map_err(|e| prefixed("method", e))?;
        }
        if self.bench.is_some() {
            self.experiment()?;
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<SpectrumQuadratic> {
        let p = &self.problem;
        if p.d < 2 {
            return Err(Error::config("problem.d", format!("must be >= 2, got {}", p.d)));
        }
        if !(p.rho > 1.0 && p.rho <= p.d as f64) {
            return Err(Error::config("problem.rho", format!("must satisfy 1 < rho <= d, got {}", p.rho)));
        }
        p.noise
            .validate()
            .map_err(|e| Error::config("problem.noise", e.to_string()))?;
        SpectrumQuadratic::new(p.d, p.rho)
    }

    pub fn noise(&self) -> NoiseModel {
        self.problem.noise
    }

    pub fn method_config(&self) -> Result<MethodConfig> {
        let m = self
            .method
            .as_ref()
            .ok_or_else(|| Error::config("method", "section is required"))?;
        Ok(m.to_config())
    }

    pub fn experiment(&self) -> Result<ExperimentSpec> {
        let b = self
            .bench
            .as_ref()
            .ok_or_else(|| Error::config("bench", "section is required"))?;
        let d = self.problem.d;
        let spec = ExperimentSpec {
            d,
            rhos: b.rhos.clone().unwrap_or_else(|| vec![self.problem.rho]),
            batch: b.batch,
            methods: b.methods.clone().unwrap_or_else(|| default_methods(d)),
            noise: self.problem.noise,
            tune: TuneSpec {
                grid: b.grid.clone(),
                tune_seeds: b.tune_seeds.clone(),
                eval_seeds: b.eval_seeds.clone(),
                budget: b.budget,
                score_window: b.score_window,
            },
            workers: b.workers,
        };
        spec.validate().map_err(|e| prefixed("bench", e))?;
        Ok(spec)
    }
}

impl MethodSection {
    pub fn to_config(&self) -> MethodConfig {
        MethodConfig {
            method: self.name,
            r: self.r,
            eta: self.eta,
            u: self.u,
            batch_base: self.batch_base,
            batch_exp: self.batch_exp,
            horizon: self.horizon,
            fixed_eta: self.fixed_eta,
            seed: self.seed,
            log_stride: self.log_stride,
        }
    }
}
