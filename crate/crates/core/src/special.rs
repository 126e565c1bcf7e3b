//! Special functions and the closed-form constants of the Haar analysis.

use crate::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const BETA_CF_MAX_ITER: usize = 300;
const BETA_CF_TOL: f64 = 1e-14;
const BETA_CF_TINY: f64 = 1e-300;

/// Natural log of the Gamma function for `x > 0` (Lanczos, g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain("ln_gamma", format!("requires finite x > 0, got {x}")));
    }
    Ok(ln_gamma_pos(x))
}

fn ln_gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx).
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma_pos(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma_pos(a) + ln_gamma_pos(b) - ln_gamma_pos(a + b)
}

/// Regularized incomplete beta function `I_x(a, b)`, the Beta(a, b) CDF.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain(
            "reg_inc_beta",
            format!("requires finite a > 0 and b > 0, got a={a}, b={b}"),
        ));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain("reg_inc_beta", format!("x must lie in [0, 1], got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let v = if x > (a + 1.0) / (a + b + 2.0) {
        1.0 - beta_cf(1.0 - x, b, a)?
    } else {
        beta_cf(x, a, b)?
    };
    Ok(v.clamp(0.0, 1.0))
}

/// `x^a (1-x)^b / (a B(a,b)) · cf(x; a, b)` with the continued fraction
/// evaluated by the modified Lentz method.
fn beta_cf(x: f64, a: f64, b: f64) -> Result<f64> {
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b);
    let front = ln_front.exp() / a;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < BETA_CF_TINY {
        d = BETA_CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;

    for m in 1..=BETA_CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        let even = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + even * d;
        if d.abs() < BETA_CF_TINY {
            d = BETA_CF_TINY;
        }
        c = 1.0 + even / c;
        if c.abs() < BETA_CF_TINY {
            c = BETA_CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let odd = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + odd * d;
        if d.abs() < BETA_CF_TINY {
            d = BETA_CF_TINY;
        }
        c = 1.0 + odd / c;
        if c.abs() < BETA_CF_TINY {
            c = BETA_CF_TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;

        if (delta - 1.0).abs() < BETA_CF_TOL {
            return Ok(front * h);
        }
    }
    Err(Error::NoConvergence { x, a, b })
}

fn check_dims(func: &'static str, d: usize, r: usize) -> Result<()> {
    if r < 1 || r > d {
        return Err(Error::domain(func, format!("requires 1 <= r <= d, got d={d}, r={r}")));
    }
    Ok(())
}

/// Shrinkage of the expected normalized subspace direction:
/// `E[PPᵀx/‖Pᵀx‖] = τ·x/‖x‖`.
///
/// Evaluated in log space; `Γ(d/2)` overflows for d above ~343.
pub fn tau(d: usize, r: usize) -> Result<f64> {
    check_dims("tau", d, r)?;
    if r == d {
        return Ok(1.0);
    }
    let (df, rf) = (d as f64, r as f64);
    let ln_ratio = ln_gamma_pos((rf + 1.0) / 2.0) + ln_gamma_pos(df / 2.0)
        - ln_gamma_pos(rf / 2.0)
        - ln_gamma_pos((df + 1.0) / 2.0);
    Ok((df / rf).sqrt() * ln_ratio.exp())
}

/// Probability that a Haar frame keeps at least half of the squared norm:
/// `P(‖Pᵀx̂‖² ≥ 1/2) = 1 - I_{r/2d}(r/2, (d-r)/2)`, and 1 when `r = d`.
pub fn mu(d: usize, r: usize) -> Result<f64> {
    check_dims("mu", d, r)?;
    if r == d {
        return Ok(1.0);
    }
    let (df, rf) = (d as f64, r as f64);
    Ok(1.0 - reg_inc_beta(rf / (2.0 * df), rf / 2.0, (df - rf) / 2.0)?)
}

/// Trace and spectral norm of a nonzero PSD smoothness matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothnessSummary {
    trace: f64,
    op_norm: f64,
}

impl SmoothnessSummary {
    pub fn new(trace: f64, op_norm: f64) -> Result<Self> {
        if !(op_norm > 0.0) || !op_norm.is_finite() {
            return Err(Error::domain("SmoothnessSummary", format!("op_norm must be positive, got {op_norm}")));
        }
        // A PSD matrix has trace >= largest eigenvalue.
        if !(trace >= op_norm * (1.0 - 1e-12)) || !trace.is_finite() {
            return Err(Error::domain(
                "SmoothnessSummary",
                format!("trace {trace} is smaller than op_norm {op_norm}"),
            ));
        }
        Ok(Self { trace, op_norm })
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn op_norm(&self) -> f64 {
        self.op_norm
    }
}

/// `tr(S)/‖S‖`.
pub fn effective_rank(s: &SmoothnessSummary) -> Result<f64> {
    if !(s.op_norm > 0.0) {
        return Err(Error::domain("effective_rank", "op_norm must be positive"));
    }
    Ok((s.trace / s.op_norm).max(1.0))
}

/// `ℓ = (d(r-1) + r_eff(d-r)) / (r(d-1))`, exactly 1 when `r = d`.
pub fn ell(d: usize, r: usize, r_eff: f64) -> Result<f64> {
    check_dims("ell", d, r)?;
    let df = d as f64;
    // Summaries computed in floating point can land a hair outside [1, d].
    let slack = 1e-9 * df;
    if !(r_eff >= 1.0 - slack && r_eff <= df + slack) {
        return Err(Error::domain("ell", format!("r_eff must lie in [1, {d}], got {r_eff}")));
    }
    if r == d {
        return Ok(1.0);
    }
    let r_eff = r_eff.clamp(1.0, df);
    let rf = r as f64;
    Ok((df * (rf - 1.0) + r_eff * (df - rf)) / (rf * (df - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn ln_factorial(n: u64) -> f64 {
        (2..=n).map(|k| (k as f64).ln()).sum()
    }

    #[test]
    fn ln_gamma_examples() {
        assert!(ln_gamma(1.0).unwrap().abs() < 1e-14);
        assert!(ln_gamma(2.0).unwrap().abs() < 1e-14);
        assert!((ln_gamma(0.5).unwrap() - 0.5 * PI.ln()).abs() < 1e-13);
        // ln(9!) = ln(362880)
        assert!((ln_gamma(10.0).unwrap() - 362_880f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(10.0).unwrap() - 12.801_827_480_081_469).abs() < 1e-12);
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        for n in 1..=60u64 {
            let want = ln_factorial(n - 1);
            let got = ln_gamma(n as f64).unwrap();
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "n={n}: {got} vs {want}");
        }
    }

    #[test]
    fn ln_gamma_below_half_uses_reflection() {
        // Γ(x+1) = xΓ(x)
        for &x in &[1e-3, 0.1, 0.25, 0.49] {
            let lhs = ln_gamma(x + 1.0).unwrap();
            let rhs = x.ln() + ln_gamma(x).unwrap();
            assert!((lhs - rhs).abs() < 1e-13, "x={x}");
        }
    }

    #[test]
    fn ln_gamma_domain() {
        assert!(ln_gamma(0.0).is_err());
        assert!(ln_gamma(-1.5).is_err());
        assert!(ln_gamma(f64::NAN).is_err());
    }

    #[test]
    fn reg_inc_beta_examples() {
        assert_eq!(reg_inc_beta(0.0, 2.0, 3.0).unwrap(), 0.0);
        assert_eq!(reg_inc_beta(1.0, 2.0, 3.0).unwrap(), 1.0);
        assert!((reg_inc_beta(0.5, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-14);
        // ∫_0^{1/2} 12 t (1-t)^2 dt = 11/16
        assert!((reg_inc_beta(0.5, 2.0, 3.0).unwrap() - 0.6875).abs() < 1e-12);
    }

    #[test]
    fn reg_inc_beta_arcsine() {
        for &x in &[0.01f64, 0.1, 0.25, 0.5, 0.75, 0.99] {
            let want = 2.0 / PI * x.sqrt().asin();
            assert!((reg_inc_beta(x, 0.5, 0.5).unwrap() - want).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn reg_inc_beta_domain() {
        assert!(reg_inc_beta(-0.1, 1.0, 1.0).is_err());
        assert!(reg_inc_beta(1.1, 1.0, 1.0).is_err());
        assert!(reg_inc_beta(0.5, 0.0, 1.0).is_err());
        assert!(reg_inc_beta(0.5, 1.0, -2.0).is_err());
        assert!(reg_inc_beta(f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn tau_examples() {
        assert_eq!(tau(7, 7).unwrap(), 1.0);
        assert_eq!(tau(1, 1).unwrap(), 1.0);
        assert!((tau(2, 1).unwrap() - 2.0 * 2f64.sqrt() / PI).abs() < 1e-12);
        assert!(tau(3, 4).is_err());
        assert!(tau(3, 0).is_err());
    }

    #[test]
    fn tau_large_dims_stay_finite() {
        let t = tau(1_000_000, 10).unwrap();
        assert!(t.is_finite() && t >= 1.0 / 2f64.sqrt() && t <= 1.0);
    }

    #[test]
    fn mu_examples() {
        assert_eq!(mu(9, 9).unwrap(), 1.0);
        assert!((mu(2, 1).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(mu(2, 3).is_err());
    }

    #[test]
    fn effective_rank_examples() {
        let s = SmoothnessSummary::new(1.0, 1.0).unwrap();
        assert_eq!(effective_rank(&s).unwrap(), 1.0);
        let s = SmoothnessSummary::new(4.0, 1.0).unwrap();
        assert_eq!(effective_rank(&s).unwrap(), 4.0);
        let s = SmoothnessSummary::new(100.0, 1.0).unwrap();
        assert_eq!(effective_rank(&s).unwrap(), 100.0);
        assert!(SmoothnessSummary::new(1.0, 0.0).is_err());
        assert!(SmoothnessSummary::new(0.5, 1.0).is_err());
    }

    #[test]
    fn ell_examples() {
        assert_eq!(ell(100, 100, 37.0).unwrap(), 1.0);
        assert!((ell(100, 4, 100.0).unwrap() - 25.0).abs() < 1e-12);
        assert!((ell(100, 4, 4.0).unwrap() - 684.0 / 396.0).abs() < 1e-12);
        assert!(ell(100, 4, 0.5).is_err());
        assert!(ell(100, 4, 101.0).is_err());
        assert!(ell(100, 101, 4.0).is_err());
    }

    proptest! {
        #[test]
        fn reg_inc_beta_reflection(x in 0.0f64..=1.0, a in 0.05f64..50.0, b in 0.05f64..50.0) {
            let lhs = reg_inc_beta(x, a, b).unwrap();
            let rhs = 1.0 - reg_inc_beta(1.0 - x, b, a).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9, "{lhs} vs {rhs}");
        }

        #[test]
        fn reg_inc_beta_monotone(x in 0.0f64..0.999, dx in 0.0f64..0.001, a in 0.1f64..30.0, b in 0.1f64..30.0) {
            let lo = reg_inc_beta(x, a, b).unwrap();
            let hi = reg_inc_beta((x + dx).min(1.0), a, b).unwrap();
            prop_assert!(hi >= lo - 1e-12);
        }

        #[test]
        fn ell_in_range(d in 2usize..3000, rfrac in 0.0f64..1.0, efrac in 0.0f64..=1.0) {
            let r = 1 + ((d - 1) as f64 * rfrac) as usize;
            let r_eff = 1.0 + (d as f64 - 1.0) * efrac;
            let l = ell(d, r, r_eff).unwrap();
            prop_assert!(l >= 1.0 - 1e-12 && l <= d as f64 / r as f64 + 1e-12);
        }

        #[test]
        fn ell_monotone_in_r_eff(d in 3usize..500, rfrac in 0.0f64..1.0, e1 in 0.0f64..=1.0, e2 in 0.0f64..=1.0) {
            let r = 1 + ((d - 1) as f64 * rfrac) as usize;
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            let dm = d as f64 - 1.0;
            prop_assert!(ell(d, r, 1.0 + dm * lo).unwrap() <= ell(d, r, 1.0 + dm * hi).unwrap() + 1e-12);
        }
    }
}
