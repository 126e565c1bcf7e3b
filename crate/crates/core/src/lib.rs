//! Randomized-subspace stochastic optimization.
//!
//! The update family implemented here samples a scaled Haar frame
//! `P ∈ R^{d×r}` (with `PᵀP = (d/r)·I_r`) every iteration, compresses a
//! minibatch gradient to `u = Pᵀg`, and moves along `-η̄·φ(u)·P·u`:
//!
//! * `φ(u) = 1` gives RS-SGD,
//! * `φ(u) = 1/‖u‖` (with `φ(0) = 0`) gives RS-NSGD,
//! * RS-NGD is the normalized method fed with exact gradients.
//!
//! With `r = d` the frame is orthogonal and the methods reduce to plain
//! SGD / NSGD / NGD.
//!
//! Modules:
//! * [`special`]: log-gamma, regularized incomplete beta and the analytic
//!   constants `τ`, `μ`, effective rank and `ℓ`.
//! * [`rng`] and [`haar`]: seeded random streams and the Haar frame sampler.
//! * [`problems`]: the diagonal test quadratic and its noise models.
//! * [`optim`] and [`bounds`]: the optimizer engine and convergence-bound
//!   calculators.
//! * [`verify`]: Monte-Carlo checks of the Haar expectation identities.
//! * [`bench`]: stepsize tuning, multi-seed evaluation and CSV/SVG export.
//! * [`config`]: the JSON run-config file.

pub mod bench;
pub mod bounds;
pub mod config;
mod error;
pub mod haar;
pub mod optim;
pub mod problems;
pub mod rng;
pub mod special;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
