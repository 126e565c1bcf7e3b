//! Test objectives and stochastic gradient oracles.
//!
//! The objective is `f(x; ξ) = ½ xᵀΛx + ⟨ξ, x⟩` with
//! `Λ = diag(1, (ρ-1)/(d-1), …, (ρ-1)/(d-1))`, so `F(x) = ½ xᵀΛx`,
//! `∇F(x) = Λx`, `‖Λ‖ = 1` and `tr Λ = ρ`.

use rand::Rng;
use rand_distr::Pareto;
use serde::{Deserialize, Serialize};

use crate::haar::ProjectionMatrix;
use crate::rng::SimRng;
use crate::special::SmoothnessSummary;
use crate::{Error, Result};

/// Norm of the default starting point `x_0 = (c, …, c)`.
pub const DEFAULT_START_NORM: f64 = 10.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumQuadratic {
    d: usize,
    rho: f64,
    lambda: Vec<f64>,
}

pub fn make_quadratic(d: usize, rho: f64) -> Result<SpectrumQuadratic> {
    SpectrumQuadratic::new(d, rho)
}

impl SpectrumQuadratic {
    pub fn new(d: usize, rho: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::domain("make_quadratic", format!("requires d >= 2, got {d}")));
        }
        if !(rho > 1.0 && rho <= d as f64) {
            return Err(Error::domain("make_quadratic", format!("requires 1 < rho <= d, got rho={rho}, d={d}")));
        }
        let tail = (rho - 1.0) / (d as f64 - 1.0);
        let mut lambda = vec![tail; d];
        lambda[0] = 1.0;
        Ok(Self { d, rho, lambda })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.lambda
    }

    /// Trace and spectral norm of `Λ`, the smoothness matrix of `F`.
    pub fn smoothness(&self) -> SmoothnessSummary {
        let trace: f64 = self.lambda.iter().sum();
        let op_norm = self.lambda.iter().cloned().fold(0.0, f64::max);
        SmoothnessSummary::new(trace, op_norm).expect("spectrum is PSD and nonzero")
    }

    /// `(c, …, c)` with `‖x_0‖ = 10`.
    pub fn default_start(&self) -> Vec<f64> {
        vec![DEFAULT_START_NORM / (self.d as f64).sqrt(); self.d]
    }

    /// `F(x) = ½ xᵀΛx`; the minimum is `F_* = 0` at the origin.
    pub fn value(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.d, "value: dimension mismatch");
        0.5 * self.lambda.iter().zip(x).map(|(l, v)| l * v * v).sum::<f64>()
    }

    pub fn full_grad_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.d, "full_grad: dimension mismatch");
        assert_eq!(out.len(), self.d, "full_grad: dimension mismatch");
        for ((o, l), v) in out.iter_mut().zip(&self.lambda).zip(x) {
            *o = l * v;
        }
    }

    /// `∇F(x) = Λx`.
    pub fn full_grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.d];
        self.full_grad_into(x, &mut g);
        g
    }

    /// `‖Λx‖`.
    pub fn grad_norm(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.d, "grad_norm: dimension mismatch");
        self.lambda
            .iter()
            .zip(x)
            .map(|(l, v)| (l * v) * (l * v))
            .sum::<f64>()
            .sqrt()
    }

    /// `vᵀΛv`.
    pub fn curvature(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.d, "curvature: dimension mismatch");
        self.lambda.iter().zip(v).map(|(l, a)| l * a * a).sum()
    }
}

/// Additive gradient noise `ξ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    None,
    /// I.i.d. `N(0, sigma_c²)` coordinates.
    Gaussian { sigma_c: f64 },
    /// I.i.d. coordinates `s · scale · U^{-1/alpha}`, `s` a fair random sign.
    SymPareto {
        alpha: f64,
        #[serde(default = "default_pareto_scale")]
        scale: f64,
    },
}

fn default_pareto_scale() -> f64 {
    1.0
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::None => Ok(()),
            NoiseModel::Gaussian { sigma_c } => {
                if sigma_c >= 0.0 && sigma_c.is_finite() {
                    Ok(())
                } else {
                    Err(Error::domain("NoiseModel", format!("sigma_c must be >= 0, got {sigma_c}")))
                }
            }
            NoiseModel::SymPareto { alpha, scale } => {
                if !(alpha > 1.0 && alpha.is_finite()) {
                    return Err(Error::domain("NoiseModel", format!("alpha must be > 1, got {alpha}")));
                }
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::domain("NoiseModel", format!("scale must be > 0, got {scale}")));
                }
                Ok(())
            }
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, NoiseModel::None)
    }

    /// Writes the average of `batch` independent noise vectors into `out`.
    ///
    /// Gaussian batches are drawn directly as one `N(0, sigma_c²/batch)`
    /// vector, which has exactly the law of the average.
    pub fn sample_batch_mean_into(&self, batch: u64, rng: &mut SimRng, out: &mut [f64]) {
        match *self {
            NoiseModel::None => out.fill(0.0),
            NoiseModel::Gaussian { sigma_c } => {
                let s = sigma_c / (batch as f64).sqrt();
                for o in out.iter_mut() {
                    *o = s * rng.normal();
                }
            }
            NoiseModel::SymPareto { alpha, scale } => {
                let dist = Pareto::new(scale, alpha).expect("validated pareto parameters");
                out.fill(0.0);
                for _ in 0..batch {
                    for o in out.iter_mut() {
                        let mag: f64 = rng.sample(dist);
                        *o += rng.sign() * mag;
                    }
                }
                let inv = 1.0 / batch as f64;
                for o in out.iter_mut() {
                    *o *= inv;
                }
            }
        }
    }
}

/// One noise vector.
pub fn sample_noise(model: &NoiseModel, d: usize, rng: &mut SimRng) -> Vec<f64> {
    let mut out = vec![0.0; d];
    model.sample_batch_mean_into(1, rng, &mut out);
    out
}

/// A minibatch gradient and the coordinate-wise oracle calls it cost.
#[derive(Clone, Debug, PartialEq)]
pub struct GradSample {
    pub g: Vec<f64>,
    pub oracle_calls: u64,
}

fn check_batch(batch: u64) -> Result<()> {
    if batch < 1 {
        return Err(Error::domain("stochastic_grad", "batch_size must be >= 1"));
    }
    Ok(())
}

/// `g = Λx + (1/B̄)Σ_j ξ_j`, costing `B̄·d` oracle calls.
pub fn stochastic_grad(
    p: &SpectrumQuadratic,
    x: &[f64],
    noise: &NoiseModel,
    batch: u64,
    rng: &mut SimRng,
) -> Result<GradSample> {
    check_batch(batch)?;
    noise.validate()?;
    let mut g = vec![0.0; p.dim()];
    noise.sample_batch_mean_into(batch, rng, &mut g);
    let grad = p.full_grad(x);
    for (gi, fi) in g.iter_mut().zip(grad) {
        *gi += fi;
    }
    Ok(GradSample {
        g,
        oracle_calls: batch * p.dim() as u64,
    })
}

/// `u = Pᵀ(Λx + noise average)`, costing `B̄·r` oracle calls.
///
/// Noise is drawn in full dimension and then projected, so an `r = d` frame
/// sees exactly the noise a full-dimensional oracle on the same stream sees.
pub fn projected_stochastic_grad(
    p: &SpectrumQuadratic,
    x: &[f64],
    noise: &NoiseModel,
    batch: u64,
    frame: &ProjectionMatrix,
    rng: &mut SimRng,
) -> Result<(Vec<f64>, u64)> {
    assert_eq!(frame.ambient_dim(), p.dim(), "frame dimension mismatch");
    let sample = stochastic_grad(p, x, noise, batch, rng)?;
    let u = frame.project(&sample.g);
    Ok((u, batch * frame.subspace_dim() as u64))
}
