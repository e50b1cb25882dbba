//! Optimal parameterizing-manifold (PM) closures for quadratic ODE systems
//!
//! This crate reduces systems of the form
//!
//! ```text
//!     dy/dt = A y + B(y, y) + F,        y in C^N,
//! ```
//!
//! to their first `m` eigenmodes by *parameterizing* the remaining modes as
//! graph functions of the resolved ones, and closing the reduced dynamics with
//! that graph. The parameterization families are closed-form in the model's
//! spectral data:
//!
//! * **LIA(τ)** — obtained by integrating a backward–forward auxiliary system
//!   over a finite window `[-τ, 0]`; quadratic in the resolved amplitudes with
//!   forcing-interaction constant/linear terms.
//! * **QSA(τ)** — finite-time quasi-stationary balance, coefficient
//!   `δ_n(τ) = (e^{β_n τ} − 1)/β_n`; its `τ → ∞` limit is the classical
//!   balance `K(ξ) = (−A_s)^{-1} Π_s (B(ξ,ξ) + F)`.
//! * **K_τ** — the implicit-Euler variant, coefficient `τ/(1 − β_n τ)`.
//! * **IM h₂ / h₂+h₃** — leading-order invariant-manifold approximations under
//!   cross non-resonance.
//! * **ZERO** — the plain Galerkin truncation (baseline).
//!
//! The scalar `τ` is optimized *per unresolved mode* against training data by
//! minimizing a parameterization defect: either the mean-square mismatch `Q_n`
//! (via a moment-matrix recast whose cost per `τ` is independent of the
//! trajectory length) or the variance-budget mismatch `J_n`. Defect,
//! correlation, and angle diagnostics quantify how much unresolved variance a
//! candidate explains; a value of the normalized defect below one is the
//! defining property of a parameterizing manifold.
//!
//! Two benchmark systems ship with the crate: a nine-dimensional
//! Rayleigh–Bénard convection model (period-doubled and chaotic regimes) and a
//! spectral-Galerkin Kuramoto–Sivashinsky equation with analytic interaction
//! coefficients and an ETDRK4 pseudo-spectral solver.
//!
//! # Layout
//!
//! * [`model`] — quadratic models, spectral decomposition, eigen-coordinates.
//! * [`param`] — the parameterization families and their numerical oracle.
//! * [`defect`] — trajectories, defects, correlations, moment sets.
//! * [`optimizer`] — per-mode τ optimization and minimizer discrimination.
//! * [`closure`] — reduced vector fields, integrators, reconstruction.
//! * [`models`] — the Rayleigh–Bénard and Kuramoto–Sivashinsky builtins.
//! * [`stats`] — spectra, PSDs, autocorrelations, norm statistics, PDFs.
//! * [`io`] — binary trajectory container, model/parameterization files, CSV.
//! * [`pipeline`] — scripted end-to-end experiment runs used by the CLI.

pub mod closure;
pub mod defect;
pub mod error;
pub mod io;
pub mod model;
pub mod models;
pub mod optimizer;
pub mod param;
pub mod pipeline;
pub mod stats;

pub use error::{Error, Result};

/// Complex scalar used for all state arithmetic, including real models.
pub type C64 = num_complex::Complex64;

/// Shorthand for the real part constructor used pervasively in model setup.
#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}
