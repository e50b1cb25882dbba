//! Nine-mode Rayleigh–Bénard convection system.
//!
//! Truncated Boussinesq convection in a three-dimensional cell with square
//! planform: five velocity amplitudes `C₁..C₅` and four temperature
//! amplitudes `C₆..C₉` (Reiterer, Lauterborn & Holzfuss 1998). The system is
//! quadratic with zero forcing,
//!
//! ```text
//!     dC/dt = A C + B(C, C),
//! ```
//!
//! and is parameterized by the Prandtl number `σ`, the reduced Rayleigh
//! number `r = R/R_c`, and the horizontal wavenumber `a` of the cell (the
//! critical square-cell value is `a = 1/2`). Two regimes are used by the
//! shipped experiments: a period-doubled window at `r = 14.1` and a chaotic
//! one at `r = 14.22`.

use crate::error::{Error, Result};
use crate::model::{BilinEntry, BilinearTensor, QuadraticModel};
use crate::{cr, C64};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

/// Parameters of the nine-mode convection system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rb9dConfig {
    /// Prandtl number.
    pub sigma: f64,
    /// Reduced Rayleigh number `r = R/R_c`.
    pub r: f64,
    /// Horizontal wavenumber of the square cell, in units of `π`.
    pub a: f64,
}

impl Default for Rb9dConfig {
    fn default() -> Self {
        Self {
            sigma: 0.5,
            r: 14.1,
            a: 0.5,
        }
    }
}

/// Period-doubled regime preset (`r = 14.1`).
pub fn rb9d_pd() -> Rb9dConfig {
    Rb9dConfig::default()
}

/// Chaotic regime preset (`r = 14.22`).
pub fn rb9d_chaos() -> Rb9dConfig {
    Rb9dConfig {
        r: 14.22,
        ..Rb9dConfig::default()
    }
}

impl Rb9dConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.r > 0.0 && self.a > 0.0) {
            return Err(Error::Config(format!(
                "rb9d parameters must be positive: sigma={}, r={}, a={}",
                self.sigma, self.r, self.a
            )));
        }
        Ok(())
    }

    /// `b₁ = 4(1+a²)/(1+2a²)` — damping of the secondary velocity/temperature
    /// harmonics.
    pub fn b1(&self) -> f64 {
        let a2 = self.a * self.a;
        4.0 * (1.0 + a2) / (1.0 + 2.0 * a2)
    }

    /// `b₂ = (1+2a²)/(2(1+a²))` — buoyancy coupling of the secondary modes.
    pub fn b2(&self) -> f64 {
        let a2 = self.a * self.a;
        (1.0 + 2.0 * a2) / (2.0 * (1.0 + a2))
    }

    /// `b₃ = 2(1−a²)/(1+a²)`.
    pub fn b3(&self) -> f64 {
        let a2 = self.a * self.a;
        2.0 * (1.0 - a2) / (1.0 + a2)
    }

    /// `b₄ = a²/(1+a²)`.
    pub fn b4(&self) -> f64 {
        let a2 = self.a * self.a;
        a2 / (1.0 + a2)
    }

    /// `b₅ = 8a²/(1+2a²)` — damping of the vertical-vorticity mode `C₅`.
    pub fn b5(&self) -> f64 {
        let a2 = self.a * self.a;
        8.0 * a2 / (1.0 + 2.0 * a2)
    }

    /// `b₆ = 4/(1+2a²)` — damping of the mean-temperature harmonic `C₆`.
    pub fn b6(&self) -> f64 {
        let a2 = self.a * self.a;
        4.0 / (1.0 + 2.0 * a2)
    }
}

/// Build the nine-mode convection model for the given parameters.
///
/// The bilinear tensor is the plain (non-symmetrized) transcription of the
/// quadratic terms, so `B(C, C)` reproduces them exactly and `B(φ, ψ)` for
/// `φ ≠ ψ` is the form used by the fluctuation rewrite around a mean state.
pub fn rb9d_build(cfg: &Rb9dConfig) -> Result<QuadraticModel> {
    cfg.validate()?;
    let (s, r) = (cfg.sigma, cfg.r);
    let (b1, b2, b3, b4, b5, b6) =
        (cfg.b1(), cfg.b2(), cfg.b3(), cfg.b4(), cfg.b5(), cfg.b6());

    let mut a = Array2::<C64>::zeros((9, 9));
    for (i, d) in [
        -s * b1,
        -s,
        -s * b1,
        -s,
        -s * b5,
        -b6,
        -b1,
        -b1,
        -1.0,
    ]
    .into_iter()
    .enumerate()
    {
        a[(i, i)] = cr(d);
    }
    a[(0, 6)] = cr(-s * b2);
    a[(1, 8)] = cr(-s / 2.0);
    a[(2, 7)] = cr(s * b2);
    a[(3, 8)] = cr(s / 2.0);
    a[(6, 0)] = cr(-r);
    a[(7, 2)] = cr(r);
    a[(8, 1)] = cr(-r);
    a[(8, 3)] = cr(r);

    // (out, i, j, value), 1-based mode labels in the comments
    let quad: [(usize, usize, usize, f64); 24] = [
        (1, 2, 4, -1.0),  // −φ₂ψ₄
        (1, 4, 4, b4),    // +b₄φ₄ψ₄
        (1, 3, 5, b3),    // +b₃φ₃ψ₅
        (2, 1, 4, 1.0),   // +φ₁ψ₄
        (2, 2, 5, -1.0),  // −φ₂ψ₅
        (2, 4, 5, 1.0),   // +φ₄ψ₅
        (3, 2, 4, 1.0),   // +φ₂ψ₄
        (3, 2, 2, -b4),   // −b₄φ₂ψ₂
        (3, 1, 5, -b3),   // −b₃φ₁ψ₅
        (4, 2, 3, -1.0),  // −φ₂ψ₃
        (4, 2, 5, -1.0),  // −φ₂ψ₅
        (4, 4, 5, 1.0),   // +φ₄ψ₅
        (5, 2, 2, 0.5),   // +½φ₂ψ₂
        (5, 4, 4, -0.5),  // −½φ₄ψ₄
        (6, 2, 9, 1.0),   // +φ₂ψ₉
        (6, 4, 9, -1.0),  // −φ₄ψ₉
        (7, 5, 8, 2.0),   // +2φ₅ψ₈
        (7, 4, 9, -1.0),  // −φ₄ψ₉
        (8, 5, 7, -2.0),  // −2φ₅ψ₇
        (8, 2, 9, 1.0),   // +φ₂ψ₉
        (9, 2, 6, -2.0),  // −2φ₂ψ₆
        (9, 4, 6, 2.0),   // +2φ₄ψ₆
        (9, 4, 7, 1.0),   // +φ₄ψ₇
        (9, 2, 8, -1.0),  // −φ₂ψ₈
    ];
    let entries = quad
        .iter()
        .map(|&(out, i, j, v)| BilinEntry {
            out: out - 1,
            i: i - 1,
            j: j - 1,
            value: cr(v),
        })
        .collect();

    Ok(QuadraticModel::new(
        a,
        BilinearTensor::new(9, entries),
        Array1::zeros(9),
    ))
}

/// The two sign-permutation involutions commuting with the dynamics (both
/// exchange the `x`- and `y`-aligned mode pairs `1↔3`, `7↔8` and fix `C₆`):
/// `J_a C = (−C₃,−C₄,−C₁,−C₂,−C₅,C₆,C₈,C₇,C₉)` and
/// `J_b C = (−C₃,C₄,−C₁,C₂,−C₅,C₆,C₈,C₇,−C₉)`.
/// Their composition is the sign flip of `(C₂,C₄,C₉)`, a third symmetry.
pub fn rb9d_involution(variant: u8, c: &Array1<C64>) -> Array1<C64> {
    let j = match variant {
        0 => [
            (2, -1.0),
            (3, -1.0),
            (0, -1.0),
            (1, -1.0),
            (4, -1.0),
            (5, 1.0),
            (7, 1.0),
            (6, 1.0),
            (8, 1.0),
        ],
        1 => [
            (2, -1.0),
            (3, 1.0),
            (0, -1.0),
            (1, 1.0),
            (4, -1.0),
            (5, 1.0),
            (7, 1.0),
            (6, 1.0),
            (8, -1.0),
        ],
        _ => panic!("involution variant must be 0 or 1"),
    };
    Array1::from_iter(j.iter().map(|&(src, sgn)| cr(sgn) * c[src]))
}
