//! Haar-distributed orthogonal frames.
//!
//! A frame is the first `r` columns of a Haar orthogonal matrix, scaled by
//! `√(d/r)`. It is produced by Householder QR of a `d×r` standard Gaussian
//! matrix with the sign of each `R_kk` folded into the corresponding column
//! of `Q`. The factorization runs column by column: after the reflectors
//! `H_0..H_{k-1}` have been applied, the trailing `d-k` entries of column
//! `k` are again i.i.d. standard normal (an orthogonal map of an
//! independent Gaussian vector), so they are drawn directly when needed.
//!
//! The frame is kept in factored form. Applying `P` or `Pᵀ` costs `O(dr)`,
//! and [`ProjectionMatrix::to_dense`] materializes it when needed.

use nalgebra::DMatrix;

use crate::rng::SimRng;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct ProjectionMatrix {
    d: usize,
    r: usize,
    scale: f64,
    // Reflector k acts on coordinates k..d; its vector is stored at
    // offset(k) with length d - k.
    reflectors: Vec<f64>,
    betas: Vec<f64>,
    signs: Vec<f64>,
    scratch: Vec<f64>,
}

fn offset(d: usize, k: usize) -> usize {
    k * d - k * (k.saturating_sub(1)) / 2
}

/// Dot product with independent partial sums so the loop vectorizes.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    acc.iter().sum::<f64>() + tail
}

/// `y ← (I - β v vᵀ) y`.
#[inline]
fn reflect(v: &[f64], beta: f64, y: &mut [f64]) {
    if beta == 0.0 {
        return;
    }
    let c = beta * dot(v, y);
    for (yi, vi) in y.iter_mut().zip(v) {
        *yi -= c * vi;
    }
}

impl ProjectionMatrix {
    /// Draws a fresh frame. Requires `1 <= r <= d`.
    pub fn sample(d: usize, r: usize, rng: &mut SimRng) -> Result<Self> {
        if d < 1 || r < 1 || r > d {
            return Err(Error::domain("sample_projection", format!("requires 1 <= r <= d, got d={d}, r={r}")));
        }
        let mut p = Self {
            d,
            r,
            scale: (d as f64 / r as f64).sqrt(),
            reflectors: vec![0.0; offset(d, r)],
            betas: vec![0.0; r],
            signs: vec![1.0; r],
            scratch: vec![0.0; d],
        };
        p.resample(rng);
        Ok(p)
    }

    /// Overwrites this frame with a fresh independent draw of the same shape.
    pub fn resample(&mut self, rng: &mut SimRng) {
        let d = self.d;
        for k in 0..self.r {
            let start = offset(d, k);
            let v = &mut self.reflectors[start..start + (d - k)];
            rng.fill_normal(v);
            let sumsq = dot(v, v);
            let head = v[0];
            if v.len() == 1 {
                // 1×1 trailing block: no reflection, R_kk = head.
                self.betas[k] = 0.0;
                self.signs[k] = if head < 0.0 { -1.0 } else { 1.0 };
                continue;
            }
            let norm = sumsq.sqrt();
            // R_kk = alpha; the sign is chosen to avoid cancellation in v[0].
            let alpha = if head >= 0.0 { -norm } else { norm };
            let v0 = head - alpha;
            v[0] = v0;
            let vv = sumsq - head * head + v0 * v0;
            self.betas[k] = if vv > 0.0 { 2.0 / vv } else { 0.0 };
            self.signs[k] = if alpha < 0.0 { -1.0 } else { 1.0 };
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.d
    }

    pub fn subspace_dim(&self) -> usize {
        self.r
    }

    /// `√(d/r)`, the operator norm of `P`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn reflector(&self, k: usize) -> &[f64] {
        let start = offset(self.d, k);
        &self.reflectors[start..start + (self.d - k)]
    }

    fn project_with(&self, x: &[f64], y: &mut [f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.d, "project: x has wrong length");
        assert_eq!(out.len(), self.r, "project: output has wrong length");
        y.copy_from_slice(x);
        for k in 0..self.r {
            reflect(self.reflector(k), self.betas[k], &mut y[k..]);
        }
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.scale * self.signs[j] * y[j];
        }
    }

    /// `out ← Pᵀx`, reusing an internal buffer. Panics on dimension mismatch.
    pub fn project_into(&mut self, x: &[f64], out: &mut [f64]) {
        let mut y = std::mem::take(&mut self.scratch);
        self.project_with(x, &mut y, out);
        self.scratch = y;
    }

    /// `Pᵀx`. Panics on dimension mismatch.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.d];
        let mut out = vec![0.0; self.r];
        self.project_with(x, &mut y, &mut out);
        out
    }

    /// `out ← P u`. Panics on dimension mismatch.
    pub fn lift_into(&self, u: &[f64], out: &mut [f64]) {
        assert_eq!(u.len(), self.r, "lift: u has wrong length");
        assert_eq!(out.len(), self.d, "lift: output has wrong length");
        for (j, o) in out.iter_mut().enumerate() {
            *o = if j < self.r { self.scale * self.signs[j] * u[j] } else { 0.0 };
        }
        for k in (0..self.r).rev() {
            reflect(self.reflector(k), self.betas[k], &mut out[k..]);
        }
    }

    /// `P u`. Panics on dimension mismatch.
    pub fn lift(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.lift_into(u, &mut out);
        out
    }

    /// The `d×r` matrix `P` (column-major storage).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.d, self.r);
        let mut e = vec![0.0; self.r];
        let mut col = vec![0.0; self.d];
        for j in 0..self.r {
            e.fill(0.0);
            e[j] = 1.0;
            self.lift_into(&e, &mut col);
            m.column_mut(j).copy_from_slice(&col);
        }
        m
    }
}

/// Convenience wrapper for [`ProjectionMatrix::sample`].
pub fn sample_projection(d: usize, r: usize, rng: &mut SimRng) -> Result<ProjectionMatrix> {
    ProjectionMatrix::sample(d, r, rng)
}

/// A Haar-distributed `d×d` orthogonal matrix.
pub fn sample_haar_orthogonal(d: usize, rng: &mut SimRng) -> Result<DMatrix<f64>> {
    if d < 1 {
        return Err(Error::domain("sample_haar_orthogonal", "requires d >= 1"));
    }
    Ok(ProjectionMatrix::sample(d, d, rng)?.to_dense())
}
