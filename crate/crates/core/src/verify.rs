//! Monte-Carlo checks of the Haar frame identities.
//!
//! For a fixed unit vector `x̂` and frames `P` drawn fresh per sample:
//!
//! * `tau`: `E[PPᵀx̂/‖Pᵀx̂‖] = τ(d,r)·x̂`. The component along `x̂` is
//!   `‖Pᵀx̂‖`; the orthogonal component must average to zero.
//! * `quadform`: `E[vᵀPPᵀSPPᵀv/‖Pᵀv‖²] = c₁·vᵀSv/‖v‖² + c₂·tr S` with
//!   `c₁ = d(r-1)/(r(d-1))`, `c₂ = (d-r)/(r(d-1))`.
//! * `beta`: `(r/d)‖Pᵀx̂‖² ~ Beta(r/2, (d-r)/2)`.
//! * `mu`: `P(‖Pᵀx̂‖² ≥ ½) = μ(d,r)`.
//!
//! The quadratic-form check draws a symmetric `S = VΛVᵀ` and sets `v = Vx̂`.
//! Because `VP'` is Haar whenever `P'` is, the statistic is computed as
//! `Σ λ_j w_j² / ‖z‖²` with `z = P'ᵀx̂`, `w = P'z`, sharing the frame draws
//! of the other checks. The analytic side is evaluated from `S` and `v`.
//!
//! With `r = d` every statistic is deterministic (`PPᵀ = I`), so those
//! checks report the exact value without sampling.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::haar::ProjectionMatrix;
use crate::rng::{streams, SimRng};
use crate::special::{mu, reg_inc_beta, tau};
use crate::stats::{ks_statistic, ks_threshold, Welford};
use crate::{Error, Result};

pub const MIN_SAMPLES_MEAN: u64 = 1_000;
pub const MIN_SAMPLES_DIST: u64 = 10_000;
/// Mean checks pass within this many standard errors.
pub const MEAN_SIGMAS: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    Tau,
    Quadform,
    Beta,
    Mu,
}

impl CheckName {
    pub const ALL: [CheckName; 4] = [CheckName::Tau, CheckName::Quadform, CheckName::Beta, CheckName::Mu];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::Tau => "tau",
            CheckName::Quadform => "quadform",
            CheckName::Beta => "beta",
            CheckName::Mu => "mu",
        }
    }

    fn min_samples(self) -> u64 {
        match self {
            CheckName::Tau | CheckName::Quadform => MIN_SAMPLES_MEAN,
            CheckName::Beta | CheckName::Mu => MIN_SAMPLES_DIST,
        }
    }
}

/// Outcome of one check.
///
/// Mean checks (`tau`, `quadform`, `mu`) pass iff
/// `|empirical - analytic| ≤ 4·stderr_or_ks`; `threshold` holds `4·stderr`.
/// The distribution check (`beta`) reports the sample mean of `Y` against
/// `r/d` in `empirical`/`analytic`, the KS distance in `stderr_or_ks`, and
/// passes iff the distance is at most `threshold`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub name: CheckName,
    pub d: usize,
    pub r: usize,
    pub n_samples: u64,
    pub seed: u64,
    pub empirical: f64,
    pub analytic: f64,
    pub stderr_or_ks: f64,
    pub threshold: f64,
    /// `tau` only: norm of the mean orthogonal component and its standard error.
    pub orth_norm: Option<f64>,
    pub orth_stderr: Option<f64>,
    /// Statistic is deterministic for this shape; nothing was sampled.
    pub trivial: bool,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, Default)]
struct Needs {
    tau: bool,
    quad: bool,
    beta: bool,
    mu: bool,
}

impl Needs {
    fn of(checks: &[CheckName]) -> Self {
        let mut n = Needs::default();
        for c in checks {
            match c {
                CheckName::Tau => n.tau = true,
                CheckName::Quadform => n.quad = true,
                CheckName::Beta => n.beta = true,
                CheckName::Mu => n.mu = true,
            }
        }
        n
    }
}

fn unit_vector(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = SimRng::new(seed, streams::VERIFY_VECTOR);
    loop {
        let mut x = vec![0.0; d];
        rng.fill_normal(&mut x);
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            x.iter_mut().for_each(|v| *v /= n);
            return x;
        }
    }
}

fn symmetric_matrix(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = SimRng::new(seed, streams::VERIFY_MATRIX);
    let mut a = DMatrix::zeros(d, d);
    for v in a.iter_mut() {
        *v = rng.normal();
    }
    (&a + a.transpose()) * 0.5
}

fn quadform_coefficients(d: usize, r: usize) -> (f64, f64) {
    if r == d {
        return (1.0, 0.0);
    }
    let (df, rf) = (d as f64, r as f64);
    (df * (rf - 1.0) / (rf * (df - 1.0)), (df - rf) / (rf * (df - 1.0)))
}

/// Raw statistics from one sampling pass.
#[derive(Default)]
struct Sampled {
    tau: Welford,
    orth_sum: Vec<f64>,
    orth_sumsq: Vec<f64>,
    quad: Welford,
    quad_analytic: f64,
    ys: Vec<f64>,
    mu_hits: u64,
}

fn sample_statistics(d: usize, r: usize, n: u64, seed: u64, needs: Needs) -> Result<Sampled> {
    let x = unit_vector(d, seed);
    let mut out = Sampled::default();

    let lambda = if needs.quad {
        let s = symmetric_matrix(d, seed);
        let eig = SymmetricEigen::new(s.clone());
        let v = &eig.eigenvectors * DVector::from_column_slice(&x);
        let vsv = v.dot(&(&s * &v)) / v.norm_squared();
        let (c1, c2) = quadform_coefficients(d, r);
        out.quad_analytic = c1 * vsv + c2 * s.trace();
        Some(eig.eigenvalues.as_slice().to_vec())
    } else {
        None
    };
    let lift = needs.tau || needs.quad;
    if needs.tau {
        out.orth_sum = vec![0.0; d];
        out.orth_sumsq = vec![0.0; d];
    }
    if needs.beta {
        out.ys.reserve(n as usize);
    }

    let mut rng = SimRng::new(seed, streams::VERIFY_FRAMES);
    let mut p = ProjectionMatrix::sample(d, r, &mut rng)?;
    let mut z = vec![0.0; r];
    let mut w = vec![0.0; d];
    let ratio = r as f64 / d as f64;
    for i in 0..n {
        if i > 0 {
            p.resample(&mut rng);
        }
        p.project_into(&x, &mut z);
        let zz: f64 = z.iter().map(|v| v * v).sum();
        let zn = zz.sqrt();
        if lift {
            p.lift_into(&z, &mut w);
        }
        if needs.tau {
            out.tau.push(zn);
            // PPᵀx̂/‖Pᵀx̂‖ minus its component ‖z‖·x̂ along x̂.
            for j in 0..d {
                let c = w[j] / zn - zn * x[j];
                out.orth_sum[j] += c;
                out.orth_sumsq[j] += c * c;
            }
        }
        if let Some(lam) = &lambda {
            let q: f64 = lam.iter().zip(&w).map(|(l, wj)| l * wj * wj).sum();
            out.quad.push(q / zz);
        }
        if needs.beta {
            out.ys.push(ratio * zz);
        }
        if needs.mu && zz >= 0.5 {
            out.mu_hits += 1;
        }
    }
    Ok(out)
}

fn check_args(name: CheckName, d: usize, r: usize, n: u64) -> Result<()> {
    if d < 1 || r < 1 || r > d {
        return Err(Error::domain("verify", format!("requires 1 <= r <= d, got d={d}, r={r}")));
    }
    if n < name.min_samples() {
        return Err(Error::domain(
            "verify",
            format!("{} check needs n >= {}, got {n}", name.as_str(), name.min_samples()),
        ));
    }
    Ok(())
}

fn mean_report(name: CheckName, d: usize, r: usize, n: u64, seed: u64, empirical: f64, analytic: f64, se: f64) -> VerifyReport {
    let threshold = MEAN_SIGMAS * se;
    VerifyReport {
        name,
        d,
        r,
        n_samples: n,
        seed,
        empirical,
        analytic,
        stderr_or_ks: se,
        threshold,
        orth_norm: None,
        orth_stderr: None,
        trivial: false,
        pass: (empirical - analytic).abs() <= threshold,
    }
}

fn trivial_report(name: CheckName, d: usize, r: usize, n: u64, seed: u64, value: f64) -> VerifyReport {
    VerifyReport {
        name,
        d,
        r,
        n_samples: n,
        seed,
        empirical: value,
        analytic: value,
        stderr_or_ks: 0.0,
        threshold: 0.0,
        orth_norm: (name == CheckName::Tau).then_some(0.0),
        orth_stderr: (name == CheckName::Tau).then_some(0.0),
        trivial: true,
        pass: true,
    }
}

/// Runs `checks` at one `(d, r)` from a single sampling pass. Each report is
/// identical to the one the corresponding single-check function returns.
pub fn verify_checks(d: usize, r: usize, n: u64, seed: u64, checks: &[CheckName]) -> Result<Vec<VerifyReport>> {
    for &c in checks {
        check_args(c, d, r, n)?;
    }
    if r == d {
        let x = unit_vector(d, seed);
        return checks
            .iter()
            .map(|&c| {
                let value = match c {
                    CheckName::Quadform => {
                        let s = symmetric_matrix(d, seed);
                        let v = DVector::from_column_slice(&x);
                        v.dot(&(&s * &v))
                    }
                    _ => 1.0,
                };
                Ok(trivial_report(c, d, r, n, seed, value))
            })
            .collect();
    }

    let mut s = sample_statistics(d, r, n, seed, Needs::of(checks))?;
    let nf = n as f64;
    checks
        .iter()
        .map(|&c| {
            Ok(match c {
                CheckName::Tau => {
                    let mut rep = mean_report(c, d, r, n, seed, s.tau.mean(), tau(d, r)?, s.tau.stderr());
                    let mut norm2 = 0.0;
                    let mut var_sum = 0.0;
                    for (sum, sq) in s.orth_sum.iter().zip(&s.orth_sumsq) {
                        let m = sum / nf;
                        norm2 += m * m;
                        var_sum += ((sq - nf * m * m) / (nf - 1.0)).max(0.0);
                    }
                    let (on, ose) = (norm2.sqrt(), (var_sum / nf).sqrt());
                    rep.orth_norm = Some(on);
                    rep.orth_stderr = Some(ose);
                    rep.pass = rep.pass && on <= MEAN_SIGMAS * ose;
                    rep
                }
                CheckName::Quadform => mean_report(c, d, r, n, seed, s.quad.mean(), s.quad_analytic, s.quad.stderr()),
                CheckName::Beta => {
                    let mean = s.ys.iter().sum::<f64>() / nf;
                    let (a, b) = (r as f64 / 2.0, (d - r) as f64 / 2.0);
                    let ks = ks_statistic(&mut s.ys, |y| reg_inc_beta(y.clamp(0.0, 1.0), a, b))?;
                    let threshold = ks_threshold(n);
                    VerifyReport {
                        name: c,
                        d,
                        r,
                        n_samples: n,
                        seed,
                        empirical: mean,
                        analytic: r as f64 / d as f64,
                        stderr_or_ks: ks,
                        threshold,
                        orth_norm: None,
                        orth_stderr: None,
                        trivial: false,
                        pass: ks <= threshold,
                    }
                }
                CheckName::Mu => {
                    let m = mu(d, r)?;
                    let se = (m * (1.0 - m) / nf).sqrt();
                    mean_report(c, d, r, n, seed, s.mu_hits as f64 / nf, m, se)
                }
            })
        })
        .collect()
}

fn single(name: CheckName, d: usize, r: usize, n: u64, seed: u64) -> Result<VerifyReport> {
    Ok(verify_checks(d, r, n, seed, &[name])?.remove(0))
}

pub fn verify_tau(d: usize, r: usize, n: u64, seed: u64) -> Result<VerifyReport> {
    single(CheckName::Tau, d, r, n, seed)
}

pub fn verify_quadform(d: usize, r: usize, n: u64, seed: u64) -> Result<VerifyReport> {
    single(CheckName::Quadform, d, r, n, seed)
}

pub fn verify_beta(d: usize, r: usize, n: u64, seed: u64) -> Result<VerifyReport> {
    single(CheckName::Beta, d, r, n, seed)
}

pub fn verify_mu(d: usize, r: usize, n: u64, seed: u64) -> Result<VerifyReport> {
    single(CheckName::Mu, d, r, n, seed)
}

/// All four checks at one `(d, r)`.
pub fn verify_point(d: usize, r: usize, n: u64, seed: u64) -> Result<Vec<VerifyReport>> {
    verify_checks(d, r, n, seed, &CheckName::ALL)
}

/// `r ∈ {1, ⌈d/10⌉, ⌈d/2⌉, d}` for each `d`, without duplicates.
pub fn default_grid(ds: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for &d in ds {
        for r in [1, d.div_ceil(10), d.div_ceil(2), d] {
            if r >= 1 && !out.contains(&(d, r)) {
                out.push((d, r));
            }
        }
    }
    out
}

pub const DEFAULT_DIMS: [usize; 4] = [2, 10, 100, 1000];

/// Writes reports as CSV rows.
pub fn write_reports_csv<W: std::io::Write>(w: W, reports: &[VerifyReport]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| Error::Parse(format!("csv write failed: {e}"));
    wtr.write_record([
        "name", "d", "r", "n", "seed", "empirical", "analytic", "stderr_or_ks", "threshold", "orth_norm", "orth_stderr",
        "trivial", "pass",
    ])
    .map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in reports {
        wtr.write_record([
            r.name.as_str().to_string(),
            r.d.to_string(),
            r.r.to_string(),
            r.n_samples.to_string(),
            r.seed.to_string(),
            r.empirical.to_string(),
            r.analytic.to_string(),
            r.stderr_or_ks.to_string(),
            r.threshold.to_string(),
            opt(r.orth_norm),
            opt(r.orth_stderr),
            r.trivial.to_string(),
            r.pass.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::Parse(format!("csv flush failed: {e}")))?;
    Ok(())
}
