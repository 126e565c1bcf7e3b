//! Convergence-bound calculators for the normalized subspace methods.
//!
//! All three bounds control `(1/T) Σ_k ‖∇F(x_k)‖` (in expectation, or with
//! probability `1 - δ` for [`theorem4_bound`]).

use crate::{Error, Result};

/// Parameters shared by the bound calculators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundInputs {
    /// `Δ0 = F(x_0) - F_*`.
    pub delta0: f64,
    pub tau: f64,
    pub ell: f64,
    /// `‖𝕃‖`.
    pub op_norm: f64,
    /// Scalar smoothness constant `L`.
    pub l_smooth: f64,
    /// Noise `p`-th central moment bound `σ`.
    pub sigma: f64,
    pub p: f64,
    pub eta: f64,
    pub u: f64,
    pub batch_base: f64,
    pub batch_exp: f64,
    pub horizon: f64,
    pub d: usize,
    pub r: usize,
    /// Failure probability, only read by [`theorem4_bound`].
    pub delta: f64,
}

impl Default for BoundInputs {
    fn default() -> Self {
        Self {
            delta0: 1.0,
            tau: 1.0,
            ell: 1.0,
            op_norm: 1.0,
            l_smooth: 1.0,
            sigma: 0.0,
            p: 2.0,
            eta: 1.0,
            u: 0.5,
            batch_base: 1.0,
            batch_exp: 0.0,
            horizon: 1.0,
            d: 1,
            r: 1,
            delta: 0.5,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("bound", format!("{name} must be positive and finite, got {v}")))
    }
}

fn nonnegative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("bound", format!("{name} must be nonnegative and finite, got {v}")))
    }
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        nonnegative("delta0", self.delta0)?;
        positive("tau", self.tau)?;
        positive("ell", self.ell)?;
        positive("op_norm", self.op_norm)?;
        positive("L", self.l_smooth)?;
        nonnegative("sigma", self.sigma)?;
        positive("eta", self.eta)?;
        positive("B", self.batch_base)?;
        nonnegative("q", self.batch_exp)?;
        if !(self.p > 1.0 && self.p <= 2.0) {
            return Err(Error::domain("bound", format!("p must lie in (1, 2], got {}", self.p)));
        }
        if !(self.u > 0.0 && self.u < 1.0) {
            return Err(Error::domain("bound", format!("u must lie in (0, 1), got {}", self.u)));
        }
        if !(self.horizon >= 1.0 && self.horizon.is_finite()) {
            return Err(Error::domain("bound", format!("T must be >= 1, got {}", self.horizon)));
        }
        if self.r < 1 || self.r > self.d {
            return Err(Error::domain("bound", format!("requires 1 <= r <= d, got d={}, r={}", self.d, self.r)));
        }
        Ok(())
    }

    fn noise_term(&self) -> f64 {
        let batch = (self.batch_base * self.horizon.powf(self.batch_exp)).max(1.0);
        self.sigma / batch.powf((self.p - 1.0) / self.p)
    }

    /// Checks `‖∇F(x_0)‖ ≤ √(2 Δ0 L)` for a reported initial gradient norm.
    pub fn check_initial_gradient(&self, grad_norm0: f64) -> Result<()> {
        let cap = initial_gradient_bound(self.delta0, self.l_smooth);
        if grad_norm0 <= cap * (1.0 + 1e-12) {
            Ok(())
        } else {
            Err(Error::domain(
                "bound",
                format!("initial gradient norm {grad_norm0} exceeds sqrt(2*delta0*L) = {cap}; delta0 or L is wrong"),
            ))
        }
    }
}

/// `√(2 Δ0 L)`, an upper bound on `‖∇F(x_0)‖` for `L`-smooth `F`.
pub fn initial_gradient_bound(delta0: f64, l_smooth: f64) -> f64 {
    (2.0 * delta0 * l_smooth).sqrt()
}

/// `Δ0/(ητT^{1-u}) + ηℓ‖𝕃‖/(2τT^u)`.
fn deterministic_part(b: &BoundInputs) -> f64 {
    let t = b.horizon;
    b.delta0 / (b.tau * b.eta * t.powf(1.0 - b.u)) + b.eta * b.ell * b.op_norm / (2.0 * b.tau * t.powf(b.u))
}

/// In-expectation bound for RS-NSGD under `p`-th moment noise:
/// `Δ0/(τηT^{1-u}) + ηℓ‖𝕃‖/(2τT^u) + 4σ/max{1, BT^q}^{(p-1)/p}`.
pub fn theorem3_bound(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    Ok(deterministic_part(b) + 4.0 * b.noise_term())
}

/// High-probability bound for RS-NSGD:
/// `2Δ0/(τηT^{1-u}) + (d/r)ηL/(τT^u)·(1 + 12√(d/r)/τ·log(1/δ))
///  + 17(d/r)√(Δ0 L)/(τ²T)·log(1/δ) + 8σ/max{1, BT^q}^{(p-1)/p}`.
pub fn theorem4_bound(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    if !(b.delta > 0.0 && b.delta < 1.0) {
        return Err(Error::domain("bound", format!("delta must lie in (0, 1), got {}", b.delta)));
    }
    let t = b.horizon;
    let ratio = b.d as f64 / b.r as f64;
    let log_term = (1.0 / b.delta).ln();
    let first = 2.0 * b.delta0 / (b.tau * b.eta * t.powf(1.0 - b.u));
    let second = ratio * b.eta * b.l_smooth / (b.tau * t.powf(b.u)) * (1.0 + 12.0 * ratio.sqrt() / b.tau * log_term);
    let third = 17.0 * ratio * (b.delta0 * b.l_smooth).sqrt() / (b.tau * b.tau * t) * log_term;
    Ok(first + second + third + 8.0 * b.noise_term())
}

/// In-expectation bound for RS-NGD (exact gradients):
/// `Δ0/(ητT^{1-u}) + ηℓ‖𝕃‖/(2τT^u)`.
pub fn theorem_c1_bound(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    Ok(deterministic_part(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{ell, tau};

    fn base() -> BoundInputs {
        BoundInputs {
            delta0: 1.0,
            eta: 1.0,
            horizon: 100.0,
            u: 0.5,
            d: 10,
            r: 10,
            ..Default::default()
        }
    }

    #[test]
    fn theorem3_example() {
        assert!((theorem3_bound(&base()).unwrap() - 0.15).abs() < 1e-15);
    }

    #[test]
    fn theorem3_noise_term() {
        let b = BoundInputs { sigma: 2.0, p: 2.0, batch_base: 1.0, batch_exp: 1.0, ..base() };
        // 4σ / (T)^{1/2} = 8/10
        assert!((theorem3_bound(&b).unwrap() - 0.95).abs() < 1e-14);
        let small = BoundInputs { batch_base: 1e-6, batch_exp: 0.0, ..b };
        assert!((theorem3_bound(&small).unwrap() - (0.15 + 8.0)).abs() < 1e-13);
    }

    #[test]
    fn theorem4_example() {
        let b = BoundInputs { delta: (-1.0f64).exp(), ..base() };
        assert!((theorem4_bound(&b).unwrap() - 1.67).abs() < 1e-12);
    }

    #[test]
    fn theorem4_delta_limit() {
        let b = BoundInputs { delta: 1.0 - 1e-12, ..base() };
        let want = 0.2 + 0.1;
        assert!((theorem4_bound(&b).unwrap() - want).abs() < 1e-9);
        assert!(theorem4_bound(&BoundInputs { delta: 1.0, ..base() }).is_err());
    }

    #[test]
    fn c1_equals_noise_free_theorem3() {
        let b = BoundInputs {
            delta0: 50.0,
            tau: tau(100, 4).unwrap(),
            ell: ell(100, 4, 4.0).unwrap(),
            horizon: 1e4,
            d: 100,
            r: 4,
            ..base()
        };
        assert_eq!(theorem_c1_bound(&b).unwrap(), theorem3_bound(&b).unwrap());
        let noisy = BoundInputs { sigma: 3.0, ..b };
        assert_eq!(theorem_c1_bound(&noisy).unwrap(), theorem_c1_bound(&b).unwrap());
    }

    #[test]
    fn c1_eventually_decreasing_in_t() {
        let mut b = BoundInputs { delta0: 10.0, eta: 0.1, ..base() };
        let mut prev = f64::INFINITY;
        for k in 0..40 {
            b.horizon = 10f64.powf(2.0 + 0.1 * k as f64);
            let v = theorem_c1_bound(&b).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(theorem3_bound(&BoundInputs { u: 0.0, ..base() }).is_err());
        assert!(theorem3_bound(&BoundInputs { p: 1.0, ..base() }).is_err());
        assert!(theorem3_bound(&BoundInputs { p: 2.5, ..base() }).is_err());
        assert!(theorem3_bound(&BoundInputs { horizon: 0.5, ..base() }).is_err());
        assert!(theorem3_bound(&BoundInputs { r: 11, ..base() }).is_err());
        assert!(theorem3_bound(&BoundInputs { delta0: -1.0, ..base() }).is_err());
    }

    #[test]
    fn initial_gradient_check() {
        let b = BoundInputs { delta0: 2.0, l_smooth: 1.0, ..base() };
        assert!(b.check_initial_gradient(2.0).is_ok());
        assert!(b.check_initial_gradient(2.1).is_err());
    }
}
