//! Stepsize tuning, multi-seed evaluation and aggregation for the
//! heavy-tailed quadratic benchmark.

mod export;

pub use export::{
    export, parse_curves_csv, parse_trajectory_csv, read_curves_csv, render_svg, write_curves_csv,
    write_trajectory_csv, ExportedFiles,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::optim::{run_with, Method, MethodConfig, RunOptions, RunRecord};
use crate::problems::{NoiseModel, SpectrumQuadratic};
use crate::{Error, Result};

/// Candidate stepsizes `10^-6, …, 10^-1`.
pub fn default_grid() -> Vec<f64> {
    vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1]
}

pub const DEFAULT_BUDGET: u64 = 400_000;

#[derive(Clone, Debug, PartialEq)]
pub struct TuneSpec {
    pub grid: Vec<f64>,
    pub tune_seeds: Vec<u64>,
    pub eval_seeds: Vec<u64>,
    /// Oracle calls per run.
    pub budget: u64,
    /// Number of final logged points averaged into the tuning score.
    pub score_window: usize,
}

impl Default for TuneSpec {
    fn default() -> Self {
        Self {
            grid: default_grid(),
            tune_seeds: vec![1, 2, 3],
            eval_seeds: vec![101, 102, 103, 104, 105],
            budget: DEFAULT_BUDGET,
            score_window: 10,
        }
    }
}

impl TuneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::config("grid", "must not be empty"));
        }
        if let Some(bad) = self.grid.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::config("grid", format!("stepsizes must be positive and finite, got {bad}")));
        }
        if self.tune_seeds.is_empty() {
            return Err(Error::config("tune_seeds", "must not be empty"));
        }
        if self.eval_seeds.is_empty() {
            return Err(Error::config("eval_seeds", "must not be empty"));
        }
        if let Some(s) = self.tune_seeds.iter().find(|s| self.eval_seeds.contains(s)) {
            return Err(Error::config("eval_seeds", format!("seed {s} is also a tuning seed")));
        }
        if self.score_window < 1 {
            return Err(Error::config("score_window", "must be >= 1"));
        }
        if self.budget < 1 {
            return Err(Error::config("budget", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    #[serde(rename = "name")]
    pub method: Method,
    pub r: usize,
}

impl MethodSpec {
    pub fn label(&self, d: usize) -> String {
        self.method.label(self.r, d)
    }
}

/// The six methods compared at `d = 100`: full-dimensional SGD/NSGD and
/// their subspace variants with `r ∈ {20, 4}`.
pub fn default_methods(d: usize) -> Vec<MethodSpec> {
    let mut out = Vec::new();
    for method in [Method::RsSgd, Method::RsNsgd] {
        for r in [d, 20, 4] {
            if r <= d && !out.contains(&MethodSpec { method, r }) {
                out.push(MethodSpec { method, r });
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub d: usize,
    pub rhos: Vec<f64>,
    /// Minibatch size `B̄`.
    pub batch: u64,
    pub methods: Vec<MethodSpec>,
    pub noise: NoiseModel,
    pub tune: TuneSpec,
    pub workers: usize,
}

impl ExperimentSpec {
    /// `d = 100`, `B̄ = 4`, `ρ ∈ {4, 20, 100}`, symmetrized Pareto noise with
    /// tail index 1.2.
    pub fn defaults() -> Self {
        Self {
            d: 100,
            rhos: vec![4.0, 20.0, 100.0],
            batch: 4,
            methods: default_methods(100),
            noise: NoiseModel::SymPareto { alpha: 1.2, scale: 1.0 },
            tune: TuneSpec::default(),
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tune.validate()?;
        self.noise.validate()?;
        if self.rhos.is_empty() {
            return Err(Error::config("rhos", "must not be empty"));
        }
        for &rho in &self.rhos {
            SpectrumQuadratic::new(self.d, rho).map_err(|e| Error::config("rhos", e.to_string()))?;
        }
        if self.batch < 1 {
            return Err(Error::config("B", "batch size must be >= 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods", "must not be empty"));
        }
        for m in &self.methods {
            if m.r < 1 || m.r > self.d {
                return Err(Error::config("methods.r", format!("must satisfy 1 <= r <= d = {}, got {}", self.d, m.r)));
            }
        }
        if self.workers < 1 {
            return Err(Error::config("workers", "must be >= 1"));
        }
        Ok(())
    }
}

/// Config for one benchmark run: constant stepsize and batch, horizon
/// chosen so the budget is the binding limit.
pub fn bench_config(m: &MethodSpec, batch: u64, budget: u64, eta_bar: f64, seed: u64) -> MethodConfig {
    let mut cfg = MethodConfig::constant(m.method, m.r, eta_bar, batch, 1, seed);
    cfg.horizon = (budget / cfg.calls_per_iteration()).max(1);
    cfg.fixed_eta = Some(eta_bar);
    cfg
}

/// One budgeted run with the default start.
pub fn budgeted_run(
    problem: &SpectrumQuadratic,
    noise: &NoiseModel,
    m: &MethodSpec,
    batch: u64,
    budget: u64,
    eta_bar: f64,
    seed: u64,
) -> Result<RunRecord> {
    let cfg = bench_config(m, batch, budget, eta_bar, seed);
    let opts = RunOptions { budget: Some(budget), x0: None };
    run_with(problem, noise, &cfg, &opts)
}

/// Mean `‖∇F‖` over the last `window` logged points; `+∞` for divergent runs.
pub fn score(record: &RunRecord, window: usize) -> f64 {
    if record.diverged() {
        return f64::INFINITY;
    }
    score_points(&record.points.iter().map(|p| p.grad_norm).collect::<Vec<_>>(), window)
}

fn score_points(values: &[f64], window: usize) -> f64 {
    let tail = &values[values.len().saturating_sub(window.max(1))..];
    let s = tail.iter().sum::<f64>() / tail.len() as f64;
    if s.is_finite() {
        s
    } else {
        f64::INFINITY
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneOutcome {
    pub eta_bar: f64,
    /// `(candidate, seed-averaged score)` in grid order.
    pub scores: Vec<(f64, f64)>,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config("workers", format!("cannot start worker pool: {e}")))
}

/// Picks the candidate with the lowest seed-averaged score; ties go to the
/// smaller stepsize.
pub fn select(scores: &[(f64, f64)]) -> Result<f64> {
    let mut best: Option<(f64, f64)> = None;
    for &(eta, s) in scores {
        if !s.is_finite() {
            continue;
        }
        best = match best {
            Some((be, bs)) if bs < s || (bs == s && be <= eta) => Some((be, bs)),
            _ => Some((eta, s)),
        };
    }
    best.map(|(e, _)| e).ok_or(Error::NoFiniteCandidate)
}

pub fn tune(spec: &ExperimentSpec, m: &MethodSpec, problem: &SpectrumQuadratic) -> Result<TuneOutcome> {
    spec.tune.validate()?;
    let t = &spec.tune;
    let jobs: Vec<(usize, u64)> = (0..t.grid.len())
        .flat_map(|i| t.tune_seeds.iter().map(move |&s| (i, s)))
        .collect();
    let results: Vec<Result<f64>> = pool(spec.workers)?.install(|| {
        jobs.par_iter()
            .map(|&(i, seed)| {
                let rec = budgeted_run(problem, &spec.noise, m, spec.batch, t.budget, t.grid[i], seed)?;
                Ok(score(&rec, t.score_window))
            })
            .collect()
    });
    let mut sums = vec![0.0; t.grid.len()];
    for (&(i, _), r) in jobs.iter().zip(results) {
        sums[i] += r?;
    }
    let scores: Vec<(f64, f64)> = t
        .grid
        .iter()
        .zip(&sums)
        .map(|(&e, &s)| (e, s / t.tune_seeds.len() as f64))
        .collect();
    Ok(TuneOutcome {
        eta_bar: select(&scores)?,
        scores,
    })
}

/// One run per evaluation seed at the given stepsize.
pub fn evaluate(spec: &ExperimentSpec, m: &MethodSpec, problem: &SpectrumQuadratic, eta_bar: f64) -> Result<Vec<RunRecord>> {
    if !(eta_bar > 0.0 && eta_bar.is_finite()) {
        return Err(Error::domain("evaluate", format!("eta_bar must be positive and finite, got {eta_bar}")));
    }
    let seeds = &spec.tune.eval_seeds;
    pool(spec.workers)?.install(|| {
        seeds
            .par_iter()
            .map(|&seed| budgeted_run(problem, &spec.noise, m, spec.batch, spec.tune.budget, eta_bar, seed))
            .collect()
    })
}

/// Mean ± population std of `‖∇F‖` across seeds on a shared oracle grid.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateCurve {
    pub label: String,
    pub r: usize,
    pub oracle_calls: Vec<u64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl AggregateCurve {
    pub fn final_mean(&self) -> f64 {
        *self.mean.last().expect("curve is never empty")
    }
}

/// Aggregates records of one configuration. Curves are cut to the shortest
/// record (a divergent seed ends early); the oracle grids must agree on
/// that common prefix.
pub fn aggregate(label: &str, records: &[RunRecord]) -> Result<AggregateCurve> {
    let first = records.first().ok_or_else(|| Error::domain("aggregate", "no records"))?;
    let len = records.iter().map(|r| r.points.len()).min().unwrap_or(0);
    if len == 0 {
        return Err(Error::domain("aggregate", "empty trajectory"));
    }
    for rec in records {
        if rec.config.r != first.config.r
            || rec.points[..len]
                .iter()
                .zip(&first.points[..len])
                .any(|(a, b)| a.oracle_calls != b.oracle_calls)
        {
            return Err(Error::GridMismatch);
        }
    }
    let n = records.len() as f64;
    let mut mean = Vec::with_capacity(len);
    let mut std = Vec::with_capacity(len);
    for i in 0..len {
        let m = records.iter().map(|r| r.points[i].grad_norm).sum::<f64>() / n;
        let v = records
            .iter()
            .map(|r| {
                let e = r.points[i].grad_norm - m;
                e * e
            })
            .sum::<f64>()
            / n;
        mean.push(m);
        std.push(v.sqrt());
    }
    Ok(AggregateCurve {
        label: label.to_string(),
        r: first.config.r,
        oracle_calls: first.points[..len].iter().map(|p| p.oracle_calls).collect(),
        mean,
        std,
    })
}

/// Mean over seeds of the final logged `‖∇F‖`.
pub fn mean_final_grad_norm(records: &[RunRecord]) -> f64 {
    records.iter().map(|r| r.last().grad_norm).sum::<f64>() / records.len() as f64
}

/// Published best stepsizes for `d = 100`, `B̄ = 4`, indexed by method and
/// `r`, one entry per `ρ ∈ {4, 20, 100}`.
pub const REFERENCE_STEPSIZES: [(Method, usize, [f64; 3]); 6] = [
    (Method::RsSgd, 100, [1e-3, 1e-2, 1e-3]),
    (Method::RsSgd, 20, [1e-3, 1e-3, 1e-4]),
    (Method::RsSgd, 4, [1e-5, 1e-4, 1e-5]),
    (Method::RsNsgd, 100, [1e-2, 1e-2, 1e-2]),
    (Method::RsNsgd, 20, [1e-2, 1e-3, 1e-3]),
    (Method::RsNsgd, 4, [1e-3, 1e-3, 1e-4]),
];

/// Reference stepsize for `(method, r, ρ)` at `d = 100`, if tabulated.
pub fn reference_stepsize(d: usize, m: &MethodSpec, rho: f64) -> Option<f64> {
    if d != 100 {
        return None;
    }
    let col = [4.0, 20.0, 100.0].iter().position(|&x| x == rho)?;
    REFERENCE_STEPSIZES
        .iter()
        .find(|(meth, r, _)| *meth == m.method && *r == m.r)
        .map(|(_, _, v)| v[col])
}

/// Results for one `(ρ, method)` pair.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodResult {
    pub spec: MethodSpec,
    pub label: String,
    pub tuned: TuneOutcome,
    pub records: Vec<RunRecord>,
    pub curve: AggregateCurve,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Panel {
    pub rho: f64,
    pub results: Vec<MethodResult>,
}

/// Tune, evaluate and aggregate every method at one `ρ`.
pub fn run_panel(spec: &ExperimentSpec, rho: f64) -> Result<Panel> {
    spec.validate()?;
    let problem = SpectrumQuadratic::new(spec.d, rho)?;
    let mut results = Vec::new();
    for m in &spec.methods {
        let label = m.label(spec.d);
        let tuned = tune(spec, m, &problem)?;
        let records = evaluate(spec, m, &problem, tuned.eta_bar)?;
        let curve = aggregate(&label, &records)?;
        results.push(MethodResult {
            spec: *m,
            label,
            tuned,
            records,
            curve,
        });
    }
    Ok(Panel { rho, results })
}

/// [`run_panel`] for every `ρ` of the spec.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<Panel>> {
    spec.rhos.iter().map(|&rho| run_panel(spec, rho)).collect()
}

/// Checks that every run was charged exactly `iterations · (calls per
/// iteration)` oracle calls and stayed within the budget.
pub fn check_accounting(spec: &ExperimentSpec, panel: &Panel) -> Result<()> {
    for res in &panel.results {
        for rec in &res.records {
            let want = rec.iterations * rec.config.calls_per_iteration();
            if rec.total_oracle_calls() != want || rec.total_oracle_calls() > spec.tune.budget {
                return Err(Error::domain(
                    "check_accounting",
                    format!(
                        "{} seed {}: {} oracle calls for {} iterations (expected {want}, budget {})",
                        res.label,
                        rec.config.seed,
                        rec.total_oracle_calls(),
                        rec.iterations,
                        spec.tune.budget
                    ),
                ));
            }
        }
    }
    Ok(())
}

fn fmt_eta(e: f64) -> String {
    format!("{e:.0e}")
}

/// Selected-stepsize table, one row per method and one column per `ρ`,
/// followed by the list of cells that differ from the reference table.
pub fn summary_table(d: usize, panels: &[Panel]) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = write!(out, "{:<16} {:>4}", "method", "r");
    for p in panels {
        let _ = write!(out, " {:>12}", format!("rho={}", p.rho));
    }
    out.push('\n');
    let mut deviations = Vec::new();
    if let Some(first) = panels.first() {
        for (i, res) in first.results.iter().enumerate() {
            let _ = write!(out, "{:<16} {:>4}", res.label, res.spec.r);
            for p in panels {
                let Some(cell) = p.results.get(i) else { continue };
                let _ = write!(out, " {:>12}", fmt_eta(cell.tuned.eta_bar));
                if let Some(reference) = reference_stepsize(d, &cell.spec, p.rho) {
                    if reference != cell.tuned.eta_bar {
                        deviations.push(format!(
                            "{} at rho={}: selected {}, reference {}",
                            cell.label,
                            p.rho,
                            fmt_eta(cell.tuned.eta_bar),
                            fmt_eta(reference)
                        ));
                    }
                }
            }
            out.push('\n');
        }
    }
    if d == 100 {
        if deviations.is_empty() {
            out.push_str("\nall selected stepsizes match the reference table\n");
        } else {
            out.push_str("\ndeviations from the reference table:\n");
            for dev in deviations {
                let _ = writeln!(out, "  {dev}");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{TracePoint, Termination};

    fn fake_record(values: &[f64], r: usize) -> RunRecord {
        RunRecord {
            config: MethodConfig::constant(Method::RsNsgd, r, 0.1, 1, values.len() as u64, 0),
            batch_size: 1,
            step_size: 0.1,
            iterations: values.len() as u64 - 1,
            points: values
                .iter()
                .enumerate()
                .map(|(k, &g)| TracePoint {
                    k: k as u64,
                    oracle_calls: k as u64 * r as u64,
                    grad_norm: g,
                    objective: 0.5 * g * g,
                })
                .collect(),
            final_x: vec![],
            termination: Termination::Completed,
        }
    }

    #[test]
    fn aggregate_hand_arithmetic() {
        let c = aggregate("x", &[fake_record(&[1.0, 5.0], 2), fake_record(&[3.0, 5.0], 2)]).unwrap();
        assert_eq!(c.mean, vec![2.0, 5.0]);
        assert_eq!(c.std, vec![1.0, 0.0]);
        assert_eq!(c.oracle_calls, vec![0, 2]);
    }

    #[test]
    fn aggregate_identical_records_has_zero_spread() {
        let r = fake_record(&[4.0, 3.0, 2.5], 3);
        let c = aggregate("x", &[r.clone(), r.clone(), r]).unwrap();
        assert!(c.std.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn aggregate_rejects_mismatched_grids() {
        assert!(matches!(
            aggregate("x", &[fake_record(&[1.0, 2.0], 2), fake_record(&[1.0, 2.0], 3)]),
            Err(Error::GridMismatch)
        ));
        assert!(aggregate("x", &[]).is_err());
    }

    #[test]
    fn aggregate_truncates_to_common_prefix() {
        let c = aggregate("x", &[fake_record(&[1.0, 2.0, 3.0], 2), fake_record(&[1.0, 2.0], 2)]).unwrap();
        assert_eq!(c.oracle_calls.len(), 2);
    }

    #[test]
    fn score_uses_last_window_and_infinity_for_divergence() {
        let mut r = fake_record(&[9.0, 1.0, 2.0, 3.0], 1);
        assert_eq!(score(&r, 2), 2.5);
        assert_eq!(score(&r, 100), 3.75);
        r.termination = Termination::Diverged { iteration: 4 };
        assert_eq!(score(&r, 2), f64::INFINITY);
    }

    #[test]
    fn score_is_monotone_in_trajectory() {
        let a = fake_record(&[3.0, 2.0, 1.0, 0.5], 1);
        let b = fake_record(&[3.0, 2.5, 1.0, 0.7], 1);
        for w in 1..5 {
            assert!(score(&b, w) >= score(&a, w));
        }
    }

    #[test]
    fn selection_rules() {
        assert_eq!(select(&[(1e-3, 2.0)]).unwrap(), 1e-3);
        assert_eq!(select(&[(1e-3, 1.0), (1e-2, 1.0)]).unwrap(), 1e-3);
        assert_eq!(select(&[(1e-2, 1.0), (1e-3, 1.0)]).unwrap(), 1e-3);
        assert_eq!(select(&[(1e-3, f64::INFINITY), (1e-2, 5.0)]).unwrap(), 1e-2);
        assert!(matches!(select(&[(1e-3, f64::INFINITY)]), Err(Error::NoFiniteCandidate)));
    }

    #[test]
    fn tune_spec_validation() {
        let mut t = TuneSpec::default();
        assert!(t.validate().is_ok());
        t.eval_seeds.push(2);
        assert!(t.validate().is_err());
        let t = TuneSpec { grid: vec![], ..TuneSpec::default() };
        assert!(t.validate().is_err());
        let t = TuneSpec { score_window: 0, ..TuneSpec::default() };
        assert!(t.validate().is_err());
    }

    #[test]
    fn default_methods_layout() {
        let ms = default_methods(100);
        let labels: Vec<String> = ms.iter().map(|m| m.label(100)).collect();
        assert_eq!(
            labels,
            ["SGD", "RS-SGD(r=20)", "RS-SGD(r=4)", "NSGD", "RS-NSGD(r=20)", "RS-NSGD(r=4)"]
        );
        assert_eq!(default_methods(10).len(), 4);
    }

    #[test]
    fn budget_sets_iteration_count() {
        let cfg = bench_config(&MethodSpec { method: Method::RsNsgd, r: 4 }, 4, 160_000, 1e-3, 1);
        assert_eq!(cfg.horizon, 10_000);
    }

    #[test]
    fn reference_lookup() {
        let m = MethodSpec { method: Method::RsSgd, r: 4 };
        assert_eq!(reference_stepsize(100, &m, 20.0), Some(1e-4));
        assert_eq!(reference_stepsize(100, &m, 7.0), None);
        assert_eq!(reference_stepsize(50, &m, 20.0), None);
    }
}
