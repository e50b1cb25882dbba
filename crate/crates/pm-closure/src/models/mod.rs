//! Builtin benchmark models.
//!
//! Two systems exercise the closure machinery end to end: the nine-mode
//! Rayleigh–Bénard convection model ([`rb9d`]) in its period-doubled and
//! chaotic regimes, and the spectral-Galerkin Kuramoto–Sivashinsky equation
//! ([`ks`]) in a moderately and a strongly turbulent regime. Each regime is
//! addressable by name through [`preset`].

pub mod heat_flux;
pub mod ks;
pub mod rb9d;

pub use heat_flux::{rb9d_heat_flux, FieldShapes, FluxSeries};
pub use ks::{
    ks_build, ks_default_init, ks_dns, ks_index, ks_regime_a, ks_regime_b, ks_rescale, KsConfig,
    KsForm, KsScales,
};
pub use rb9d::{rb9d_build, rb9d_chaos, rb9d_involution, rb9d_pd, Rb9dConfig};

use crate::error::{Error, Result};

/// A named benchmark regime: the model parameters plus the simulation
/// defaults (step size, production run length, resolved-mode cutoff) used by
/// the scripted experiments.
#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    Rb9d {
        cfg: Rb9dConfig,
        dt: f64,
        t_final: f64,
        cutoff: usize,
    },
    Ks {
        cfg: KsConfig,
        t_final: f64,
        cutoff: usize,
    },
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 4] = ["rb9d-pd", "rb9d-chaos", "ks-a", "ks-b"];

/// Look up a benchmark regime by name.
///
/// * `rb9d-pd` — convection at `r = 14.1` (period-doubled), cutoff `m = 5`.
/// * `rb9d-chaos` — convection at `r = 14.22` (chaotic), cutoff `m = 5`.
/// * `ks-a` — Kuramoto–Sivashinsky, 31 unstable pairs, cutoff at `m = 31`.
/// * `ks-b` — rescaled Kuramoto–Sivashinsky, 90 unstable pairs, `m = 90`
///   (hours-scale; meant for extended runs only).
pub fn preset(name: &str) -> Result<Preset> {
    match name {
        "rb9d-pd" => Ok(Preset::Rb9d {
            cfg: rb9d_pd(),
            dt: 5e-3,
            t_final: 100.0,
            cutoff: 5,
        }),
        "rb9d-chaos" => Ok(Preset::Rb9d {
            cfg: rb9d_chaos(),
            dt: 5e-3,
            t_final: 1000.0,
            cutoff: 5,
        }),
        "ks-a" => Ok(Preset::Ks {
            cfg: ks_regime_a(),
            t_final: 50.0,
            cutoff: 31,
        }),
        "ks-b" => Ok(Preset::Ks {
            cfg: ks_regime_b(),
            t_final: 2e-3,
            cutoff: 90,
        }),
        other => Err(Error::Config(format!(
            "unknown preset '{other}' (available: {})",
            PRESET_NAMES.join(", ")
        ))),
    }
}
