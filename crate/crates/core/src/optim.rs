//! The subspace optimizer engine.
//!
//! Each iteration samples a fresh frame `P_k`, forms `u_k = P_kᵀ g_k` from a
//! minibatch gradient (or the exact gradient for RS-NGD), and updates
//! `x_{k+1} = x_k - η̄ φ(u_k) P_k u_k`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::haar::ProjectionMatrix;
use crate::problems::{NoiseModel, SpectrumQuadratic};
use crate::rng::{streams, SimRng};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// `φ = 1`.
    RsSgd,
    /// `φ(u) = 1/‖u‖`, `φ(0) = 0`.
    RsNsgd,
    /// Normalized steps along the projected exact gradient.
    RsNgd,
}

impl Method {
    pub fn is_normalized(self) -> bool {
        !matches!(self, Method::RsSgd)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::RsSgd => "rs_sgd",
            Method::RsNsgd => "rs_nsgd",
            Method::RsNgd => "rs_ngd",
        }
    }

    /// Display label; `r = d` runs are named after the full-dimensional method.
    pub fn label(self, r: usize, d: usize) -> String {
        let base = match self {
            Method::RsSgd => "SGD",
            Method::RsNsgd => "NSGD",
            Method::RsNgd => "NGD",
        };
        if r == d {
            base.to_string()
        } else {
            format!("RS-{base}(r={r})")
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rs_sgd" => Ok(Method::RsSgd),
            "rs_nsgd" => Ok(Method::RsNsgd),
            "rs_ngd" => Ok(Method::RsNgd),
            other => Err(Error::Parse(format!("unknown method {other:?}"))),
        }
    }
}

/// Method, schedule and horizon for one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub method: Method,
    pub r: usize,
    pub eta: f64,
    /// Stepsize exponent; `0` means a constant stepsize.
    pub u: f64,
    /// Batch base `B`.
    pub batch_base: f64,
    /// Batch exponent `q`.
    pub batch_exp: f64,
    /// Horizon `T`.
    pub horizon: u64,
    pub fixed_eta: Option<f64>,
    pub seed: u64,
    /// Log every `log_stride`-th iterate (the last one is always logged).
    pub log_stride: u64,
}

impl MethodConfig {
    /// A constant-stepsize, constant-batch configuration.
    pub fn constant(method: Method, r: usize, eta_bar: f64, batch: u64, horizon: u64, seed: u64) -> Self {
        Self {
            method,
            r,
            eta: eta_bar,
            u: 0.0,
            batch_base: batch as f64,
            batch_exp: 0.0,
            horizon,
            fixed_eta: None,
            seed,
            log_stride: 1,
        }
    }

    /// Checks the config against ambient dimension `d`. Errors carry the
    /// offending field name.
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.r < 1 || self.r > d {
            return Err(Error::config("r", format!("must satisfy 1 <= r <= d = {d}, got {}", self.r)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::config("eta", format!("must be positive and finite, got {}", self.eta)));
        }
        if !(0.0..1.0).contains(&self.u) {
            return Err(Error::config("u", format!("must lie in [0, 1), got {}", self.u)));
        }
        if !(self.batch_base > 0.0 && self.batch_base.is_finite()) {
            return Err(Error::config("B", format!("must be positive and finite, got {}", self.batch_base)));
        }
        if !(self.batch_exp >= 0.0 && self.batch_exp.is_finite()) {
            return Err(Error::config("q", format!("must be >= 0, got {}", self.batch_exp)));
        }
        if self.horizon < 1 {
            return Err(Error::config("T", "must be >= 1"));
        }
        if let Some(e) = self.fixed_eta {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::config("fixed_eta", format!("must be positive and finite, got {e}")));
            }
        }
        if self.log_stride < 1 {
            return Err(Error::config("log_stride", "must be >= 1"));
        }
        let raw = self.batch_base * (self.horizon as f64).powf(self.batch_exp);
        if !(raw < 2f64.powi(52)) {
            return Err(Error::config("B", format!("batch size B*T^q = {raw} is too large")));
        }
        self.batch_size()
            .checked_mul(self.r as u64)
            .and_then(|c| c.checked_mul(self.horizon))
            .ok_or_else(|| Error::config("T", "total oracle calls overflow 64 bits"))?;
        if !(self.step_size() > 0.0) {
            return Err(Error::config("eta", "derived stepsize eta*T^-u underflows to zero"));
        }
        Ok(())
    }

    /// `B̄ = ⌈max{1, B·T^q}⌉`.
    pub fn batch_size(&self) -> u64 {
        let raw = self.batch_base * (self.horizon as f64).powf(self.batch_exp);
        raw.max(1.0).ceil() as u64
    }

    /// `η̄ = fixed_eta`, or `η·T^{-u}`.
    pub fn step_size(&self) -> f64 {
        self.fixed_eta
            .unwrap_or_else(|| self.eta * (self.horizon as f64).powf(-self.u))
    }

    /// Oracle calls charged per iteration.
    pub fn calls_per_iteration(&self) -> u64 {
        match self.method {
            Method::RsNgd => self.r as u64,
            _ => self.batch_size() * self.r as u64,
        }
    }
}

/// `φ(u)`, with `φ(0) = 0` for the normalized methods.
pub fn scaling(method: Method, u: &[f64]) -> f64 {
    if !method.is_normalized() {
        return 1.0;
    }
    let n = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0.0 {
        0.0
    } else {
        1.0 / n
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// `x ← x - η̄ φ(u) P u`, with `dir` as scratch of length `d`.
fn step_in_place(method: Method, x: &mut [f64], p: &ProjectionMatrix, u: &[f64], eta_bar: f64, dir: &mut [f64]) {
    let c = eta_bar * scaling(method, u);
    if c == 0.0 {
        return;
    }
    p.lift_into(u, dir);
    for (xi, di) in x.iter_mut().zip(dir.iter()) {
        *xi -= c * di;
    }
}

/// One update `x_{k+1} = x_k - η̄ φ(u_k) P_k u_k`.
pub fn step(method: Method, x: &[f64], p: &ProjectionMatrix, u: &[f64], eta_bar: f64) -> Result<Vec<f64>> {
    assert_eq!(x.len(), p.ambient_dim(), "step: x has wrong length");
    assert_eq!(u.len(), p.subspace_dim(), "step: u has wrong length");
    if !(eta_bar > 0.0 && eta_bar.is_finite()) {
        return Err(Error::domain("step", format!("eta_bar must be positive and finite, got {eta_bar}")));
    }
    if !all_finite(x) || !all_finite(u) {
        return Err(Error::domain("step", "non-finite input"));
    }
    let mut out = x.to_vec();
    let mut dir = vec![0.0; x.len()];
    step_in_place(method, &mut out, p, u, eta_bar, &mut dir);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub k: u64,
    pub oracle_calls: u64,
    pub grad_norm: f64,
    pub objective: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Completed,
    /// The oracle budget would be exceeded by the next iteration.
    BudgetExhausted,
    /// The iterate became non-finite at this iteration; the trace ends at
    /// the last finite point.
    Diverged { iteration: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub config: MethodConfig,
    pub batch_size: u64,
    pub step_size: f64,
    /// Iterations actually executed.
    pub iterations: u64,
    pub points: Vec<TracePoint>,
    pub final_x: Vec<f64>,
    pub termination: Termination,
}

impl RunRecord {
    pub fn last(&self) -> &TracePoint {
        self.points.last().expect("trace always holds the initial point")
    }

    pub fn diverged(&self) -> bool {
        matches!(self.termination, Termination::Diverged { .. })
    }

    pub fn total_oracle_calls(&self) -> u64 {
        self.last().oracle_calls
    }

    /// `(1/K) Σ_{k<K} ‖∇F(x_k)‖` over the logged points before the last one.
    /// Exact when `log_stride = 1`.
    pub fn mean_grad_norm(&self) -> f64 {
        let pts = &self.points[..self.points.len() - 1];
        if pts.is_empty() {
            return self.points[0].grad_norm;
        }
        pts.iter().map(|p| p.grad_norm).sum::<f64>() / pts.len() as f64
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    /// Stop before any iteration that would push cumulative oracle calls
    /// past this budget.
    pub budget: Option<u64>,
    /// Starting point; defaults to the problem's default start.
    pub x0: Option<Vec<f64>>,
}

/// What the observer sees after each executed iteration.
pub struct StepEvent<'a> {
    /// Zero-based iteration index (`x_prev = x_k`).
    pub k: u64,
    pub x_prev: &'a [f64],
    pub x_next: &'a [f64],
    pub u: &'a [f64],
    pub frame: &'a ProjectionMatrix,
    pub eta_bar: f64,
}

pub fn run(problem: &SpectrumQuadratic, noise: &NoiseModel, cfg: &MethodConfig) -> Result<RunRecord> {
    run_with(problem, noise, cfg, &RunOptions::default())
}

pub fn run_with(problem: &SpectrumQuadratic, noise: &NoiseModel, cfg: &MethodConfig, opts: &RunOptions) -> Result<RunRecord> {
    run_observed(problem, noise, cfg, opts, |_| {})
}

/// Runs the method, calling `observe` after every executed iteration.
pub fn run_observed<F>(
    problem: &SpectrumQuadratic,
    noise: &NoiseModel,
    cfg: &MethodConfig,
    opts: &RunOptions,
    mut observe: F,
) -> Result<RunRecord>
where
    F: FnMut(&StepEvent<'_>),
{
    let d = problem.dim();
    cfg.validate(d)?;
    noise.validate()?;
    let x0 = match &opts.x0 {
        Some(x) => {
            if x.len() != d {
                return Err(Error::domain("run", format!("x0 has length {}, expected {d}", x.len())));
            }
            x.clone()
        }
        None => problem.default_start(),
    };
    if !all_finite(&x0) {
        return Err(Error::domain("run", "x0 is not finite"));
    }

    let batch = cfg.batch_size();
    let eta_bar = cfg.step_size();
    let per_iter = cfg.calls_per_iteration();
    let mut iterations = cfg.horizon;
    let mut termination = Termination::Completed;
    if let Some(budget) = opts.budget {
        let affordable = budget / per_iter;
        if affordable < iterations {
            iterations = affordable;
            termination = Termination::BudgetExhausted;
        }
    }

    let mut frame_rng = SimRng::new(cfg.seed, streams::FRAMES);
    let mut noise_rng = SimRng::new(cfg.seed, streams::NOISE);
    let mut frame = ProjectionMatrix::sample(d, cfg.r, &mut frame_rng)?;

    let mut x = x0;
    let mut x_next = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut u = vec![0.0; cfg.r];
    let mut dir = vec![0.0; d];

    let point = |k: u64, x: &[f64]| TracePoint {
        k,
        oracle_calls: k * per_iter,
        grad_norm: problem.grad_norm(x),
        objective: problem.value(x),
    };
    let mut points = vec![point(0, &x)];

    for k in 0..iterations {
        // The first frame was drawn at construction.
        if k > 0 {
            frame.resample(&mut frame_rng);
        }
        match cfg.method {
            Method::RsNgd => problem.full_grad_into(&x, &mut g),
            _ => {
                noise.sample_batch_mean_into(batch, &mut noise_rng, &mut g);
                problem.full_grad_into(&x, &mut grad);
                for (gi, fi) in g.iter_mut().zip(&grad) {
                    *gi += fi;
                }
            }
        }
        frame.project_into(&g, &mut u);
        x_next.copy_from_slice(&x);
        if all_finite(&u) {
            step_in_place(cfg.method, &mut x_next, &frame, &u, eta_bar, &mut dir);
        }
        let gn = problem.grad_norm(&x_next);
        if !all_finite(&u) || !all_finite(&x_next) || !gn.is_finite() || !problem.value(&x_next).is_finite() {
            termination = Termination::Diverged { iteration: k + 1 };
            break;
        }
        observe(&StepEvent {
            k,
            x_prev: &x,
            x_next: &x_next,
            u: &u,
            frame: &frame,
            eta_bar,
        });
        std::mem::swap(&mut x, &mut x_next);
        let done = k + 1;
        if done % cfg.log_stride == 0 || done == iterations {
            points.push(point(done, &x));
        }
    }

    let executed = match termination {
        Termination::Diverged { iteration } => iteration - 1,
        _ => iterations,
    };
    if let Some(last) = points.last() {
        if last.k != executed {
            points.push(point(executed, &x));
        }
    }

    Ok(RunRecord {
        config: cfg.clone(),
        batch_size: batch,
        step_size: eta_bar,
        iterations: executed,
        points,
        final_x: x,
        termination,
    })
}
