//! Trajectory diagnostics: parameterization defects, correlation angles, and
//! time-moment matrices.
//!
//! Every diagnostic here is a time average over a uniformly sampled training
//! trajectory in eigen-coordinates, and every time average uses the composite
//! trapezoid rule — one quadrature convention shared by all quantities so that
//! identities between them (for instance, the moment recast of the windowed
//! defect) hold to rounding and not merely to quadrature error.
//!
//! Three defects are provided per unresolved mode `n`:
//!
//! * `Q_n` — the mean-square parameterization defect
//!   `(1/T) ∫ |u_n(t) − Φ_n(ξ(t))|² dt`, optionally normalized by the mode's
//!   mean energy. The normalized defect of the zero parameterization is
//!   exactly one, and values below one are the defining property of a
//!   parameterizing manifold.
//! * `J_n` — the variance-budget mismatch
//!   `|(1/T) ∫ u_n² − (1/T) ∫ Φ_n²| / (1/T) ∫ |u_n|²`, used when the pointwise
//!   defect is too demanding and only the unresolved energy budget matters.
//! * the global defect — the defect of all unresolved modes at once,
//!   `∫ ‖y_s − Ψ(y_c)‖² / ∫ ‖y_s‖²`.
//!
//! For the windowed (backward–forward) family the mean-square defect is a
//! quadratic form in the window coefficients: collecting the time moments of
//! the resolved amplitudes once (a [`MomentSet`]) makes the defect and its
//! exact τ-derivative evaluable at any window length at a cost independent of
//! the trajectory length. [`qn_recast`] and [`qn_derivative`] implement that
//! form; the per-mode optimizer drives its descent through them.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::model::EigenModel;
use crate::param::{tau_coeffs, Family, Parameterization};
use crate::C64;

/// Reference-energy floor below which a normalized defect is reported as
/// [`Error::ZeroEnergy`] instead of a meaningless huge ratio.
pub const ENERGY_FLOOR: f64 = 1e-300;

/// Norm floor below which a correlation sample is dropped as undefined.
pub const CORRELATION_FLOOR: f64 = 1e-14;

// ---------------------------------------------------------------------------
// trajectories
// ---------------------------------------------------------------------------

/// A uniformly sampled trajectory in eigen-coordinates.
///
/// `samples[k]` is the full complex amplitude vector at time `t0 + k·dt`.
/// There are `K + 1` samples spanning `T = K·dt`; at least two steps are
/// required so the trapezoid rule has an interior.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub t0: f64,
    pub samples: Vec<Array1<C64>>,
}

impl Trajectory {
    /// Wraps raw samples, validating spacing and shape.
    pub fn new(dt: f64, t0: f64, samples: Vec<Array1<C64>>) -> Self {
        assert!(dt.is_finite() && dt > 0.0, "sample spacing must be positive");
        assert!(samples.len() >= 3, "need at least two time steps");
        let dim = samples[0].len();
        assert!(dim > 0, "empty state vectors");
        assert!(
            samples.iter().all(|s| s.len() == dim),
            "all samples must share one dimension"
        );
        Trajectory { dt, t0, samples }
    }

    /// Number of time steps `K` (one less than the number of samples).
    pub fn steps(&self) -> usize {
        self.samples.len() - 1
    }

    /// Time span `T = K·dt`.
    pub fn duration(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    /// Time of sample `k`.
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Sample `k` as a contiguous slice.
    pub fn state(&self, k: usize) -> &[C64] {
        self.samples[k].as_slice().expect("samples are contiguous")
    }
}

/// Trapezoid end-point weight: 1/2 at the boundary samples, 1 inside.
#[inline]
fn trap_w(k: usize, last: usize) -> f64 {
    if k == 0 || k == last {
        0.5
    } else {
        1.0
    }
}

// ---------------------------------------------------------------------------
// pair indexing
// ---------------------------------------------------------------------------

/// Flat index of the ordered resolved pair `(i, j)` among `m²` pairs,
/// enumerated row-major: `(0,0), (0,1), …, (0,m−1), (1,0), …`.
#[inline]
pub fn index_of(i: usize, j: usize, m: usize) -> usize {
    debug_assert!(i < m && j < m);
    i * m + j
}

/// Inverse of [`index_of`]: the ordered pair packed at flat index `k`.
#[inline]
pub fn pair_of(k: usize, m: usize) -> (usize, usize) {
    debug_assert!(k < m * m);
    (k / m, k % m)
}

// ---------------------------------------------------------------------------
// defects
// ---------------------------------------------------------------------------

/// Mean-square parameterization defect of unresolved mode `n`:
/// `(1/T) ∫ |u_n(t) − Φ_n(ξ(t))|² dt`, divided by the mode's mean energy
/// `(1/T) ∫ |u_n|² dt` when `normalized` is set.
///
/// Numerator and denominator are accumulated in the same sweep with identical
/// weights, so for an identically-zero parameterization the normalized defect
/// is exactly 1. A normalized request on a mode whose reference energy is
/// below [`ENERGY_FLOOR`] fails with [`Error::ZeroEnergy`].
pub fn defect_qn(
    traj: &Trajectory,
    p: &Parameterization,
    n: usize,
    normalized: bool,
) -> Result<f64> {
    assert_eq!(traj.dim(), p.dim, "trajectory/parameterization dimension mismatch");
    assert!(n >= p.cutoff && n < p.dim, "mode index outside the unresolved range");
    let last = traj.steps();
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..=last {
        let w = trap_w(k, last);
        let x = traj.state(k);
        let phi = p.eval_mode(n, &x[..p.cutoff]);
        num += w * (x[n] - phi).norm_sqr();
        den += w * x[n].norm_sqr();
    }
    let steps = last as f64;
    if normalized {
        if den / steps < ENERGY_FLOOR {
            return Err(Error::ZeroEnergy { mode: n });
        }
        Ok(num / den)
    } else {
        Ok(num / steps)
    }
}

/// Variance-budget mismatch of unresolved mode `n`:
/// `|(1/T) ∫ u_n² dt − (1/T) ∫ Φ_n² dt| / (1/T) ∫ |u_n|² dt`.
///
/// The squares are plain (unconjugated) squares, so for real amplitude
/// conventions they coincide with the energies and the zero parameterization
/// scores exactly 1. Fails with [`Error::ZeroEnergy`] below [`ENERGY_FLOOR`].
pub fn defect_jn(traj: &Trajectory, p: &Parameterization, n: usize) -> Result<f64> {
    assert_eq!(traj.dim(), p.dim, "trajectory/parameterization dimension mismatch");
    assert!(n >= p.cutoff && n < p.dim, "mode index outside the unresolved range");
    let last = traj.steps();
    let mut num = C64::default();
    let mut den = 0.0;
    for k in 0..=last {
        let w = trap_w(k, last);
        let x = traj.state(k);
        let phi = p.eval_mode(n, &x[..p.cutoff]);
        num += w * (x[n] * x[n] - phi * phi);
        den += w * x[n].norm_sqr();
    }
    if den / (last as f64) < ENERGY_FLOOR {
        return Err(Error::ZeroEnergy { mode: n });
    }
    Ok(num.norm() / den)
}

/// Global parameterization defect over the whole unresolved block:
/// `∫ ‖y_s(t) − Ψ(y_c(t))‖² dt / ∫ ‖y_s(t)‖² dt` in eigen-coordinates.
///
/// A value below one is the parameterizing-manifold criterion on this
/// trajectory. Fails with [`Error::ZeroEnergy`] (tagged with the first
/// unresolved index) when the unresolved energy is below [`ENERGY_FLOOR`].
pub fn defect_global(traj: &Trajectory, p: &Parameterization) -> Result<f64> {
    assert_eq!(traj.dim(), p.dim, "trajectory/parameterization dimension mismatch");
    let last = traj.steps();
    let m = p.cutoff;
    let mut phi = vec![C64::default(); p.unresolved()];
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..=last {
        let w = trap_w(k, last);
        let x = traj.state(k);
        p.eval_into(&x[..m], &mut phi);
        for (i, &f) in phi.iter().enumerate() {
            num += w * (x[m + i] - f).norm_sqr();
            den += w * x[m + i].norm_sqr();
        }
    }
    if den / (last as f64) < ENERGY_FLOOR {
        return Err(Error::ZeroEnergy { mode: p.cutoff });
    }
    Ok(num / den)
}

// ---------------------------------------------------------------------------
// correlation diagnostics
// ---------------------------------------------------------------------------

/// Uniformly sampled correlation/angle series.
///
/// `values[k]` holds `(c, α)` at time `t0 + k·dt`: the correlation cosine
/// `c ∈ [−1, 1]` and the angle `α = arccos c ∈ [0, π]`. Samples where either
/// vector norm falls below [`CORRELATION_FLOOR`] carry `None` — the angle is
/// undefined there and is reported as missing rather than clamped.
#[derive(Debug, Clone)]
pub struct AngleSeries {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<Option<(f64, f64)>>,
}

impl AngleSeries {
    /// Time of sample `k`.
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Iterator over the defined samples as `(t, c, α)`.
    pub fn defined(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(k, v)| v.map(|(c, a)| (self.time(k), c, a)))
    }
}

fn angle_sample(ip: C64, ns_pred: f64, ns_true: f64) -> Option<(f64, f64)> {
    let (np, nt) = (ns_pred.sqrt(), ns_true.sqrt());
    if np < CORRELATION_FLOOR || nt < CORRELATION_FLOOR {
        return None;
    }
    let c = (ip.re / (np * nt)).clamp(-1.0, 1.0);
    Some((c, c.acos()))
}

/// Correlation cosine and angle between the predicted and the true unresolved
/// state along the trajectory: `c(t) = Re⟨Ψ(y_c), y_s⟩ / (‖Ψ(y_c)‖ ‖y_s‖)`,
/// `α(t) = arccos c(t)`.
pub fn correlation(traj: &Trajectory, p: &Parameterization) -> AngleSeries {
    assert_eq!(traj.dim(), p.dim, "trajectory/parameterization dimension mismatch");
    let m = p.cutoff;
    let mut phi = vec![C64::default(); p.unresolved()];
    let values = (0..traj.samples.len())
        .map(|k| {
            let x = traj.state(k);
            p.eval_into(&x[..m], &mut phi);
            let mut ip = C64::default();
            let (mut np, mut nt) = (0.0, 0.0);
            for (i, &f) in phi.iter().enumerate() {
                ip += f * x[m + i].conj();
                np += f.norm_sqr();
                nt += x[m + i].norm_sqr();
            }
            angle_sample(ip, np, nt)
        })
        .collect();
    AngleSeries { t0: traj.t0, dt: traj.dt, values }
}

/// Correlation cosine and angle restricted to the two-component block
/// `(n, n + 1)` — for real-mode conventions this is the cosine/sine pair of a
/// single wavenumber, correlated as one 2-vector.
pub fn correlation_modewise(traj: &Trajectory, p: &Parameterization, n: usize) -> AngleSeries {
    assert_eq!(traj.dim(), p.dim, "trajectory/parameterization dimension mismatch");
    assert!(
        n >= p.cutoff && n + 1 < p.dim,
        "pair (n, n+1) must lie in the unresolved range"
    );
    let m = p.cutoff;
    let values = (0..traj.samples.len())
        .map(|k| {
            let x = traj.state(k);
            let f = [p.eval_mode(n, &x[..m]), p.eval_mode(n + 1, &x[..m])];
            let mut ip = C64::default();
            let (mut np, mut nt) = (0.0, 0.0);
            for (i, &fi) in f.iter().enumerate() {
                ip += fi * x[n + i].conj();
                np += fi.norm_sqr();
                nt += x[n + i].norm_sqr();
            }
            angle_sample(ip, np, nt)
        })
        .collect();
    AngleSeries { t0: traj.t0, dt: traj.dt, values }
}

// ---------------------------------------------------------------------------
// time moments
// ---------------------------------------------------------------------------

/// Trapezoid time moments of the resolved amplitudes against one unresolved
/// mode, indexed by resolved pairs `p = (p₁, p₂)` via [`index_of`].
///
/// With `u_i` the resolved amplitudes and `u_n` the tracked unresolved mode,
/// the stored means are
///
/// ```text
///   q1[p]          = ⟨ū_{p₁}⟩              q2[p]       = ⟨ū_{p₁} ū_{p₂}⟩
///   q2_hat[p]      = ⟨u_n ū_{p₁}⟩          q3[p]       = ⟨u_n ū_{p₁} ū_{p₂}⟩
///   q2_tilde[p,q]  = ⟨ū_{p₁} u_{q₁}⟩       q3_tilde[p,q] = ⟨ū_{p₁} u_{q₁} u_{q₂}⟩
///   q4[p,q]        = ⟨ū_{p₁} ū_{p₂} u_{q₁} u_{q₂}⟩
/// ```
///
/// plus the scalars `⟨u_n ū_n⟩` and `⟨u_n⟩`. `q2_tilde` and `q4` are Hermitian
/// by construction. One set serves every window length τ: the mean-square
/// defect of the windowed family is a fixed quadratic form in these moments.
#[derive(Debug, Clone)]
pub struct MomentSet {
    /// Number of resolved amplitudes the pair indices run over.
    pub m: usize,
    /// Tracked unresolved mode (absolute index).
    pub mode: usize,
    pub q1: Array1<C64>,
    pub q2: Array1<C64>,
    pub q2_hat: Array1<C64>,
    pub q3: Array1<C64>,
    pub q2_tilde: Array2<C64>,
    pub q3_tilde: Array2<C64>,
    pub q4: Array2<C64>,
    /// Mean energy `⟨u_n ū_n⟩` of the tracked mode.
    pub un_sq: f64,
    /// Mean amplitude `⟨u_n⟩` of the tracked mode.
    pub un_mean: C64,
}

impl MomentSet {
    /// Largest deviation of `q2_tilde` and `q4` from exact Hermitian symmetry.
    pub fn hermitian_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mm = self.m * self.m;
        for p in 0..mm {
            for q in 0..mm {
                worst = worst.max((self.q4[(p, q)] - self.q4[(q, p)].conj()).norm());
                worst = worst
                    .max((self.q2_tilde[(p, q)] - self.q2_tilde[(q, p)].conj()).norm());
            }
        }
        worst
    }
}

/// Collects the [`MomentSet`] of unresolved mode `n` over the first `m`
/// resolved amplitudes in a single trapezoid sweep.
///
/// Cost is `O(K · m⁴)` time and `O(m⁴)` memory from the four-index moment, so
/// this path suits modest resolved dimensions; high-dimensional closures
/// should optimize through the variance-budget defect instead.
pub fn moments(traj: &Trajectory, n: usize, m: usize) -> MomentSet {
    assert!(n < traj.dim(), "tracked mode outside the state");
    assert!(m >= 1 && m <= traj.dim(), "resolved count outside the state");
    let last = traj.steps();
    let steps = last as f64;
    let mm = m * m;

    let mut q1 = Array1::<C64>::zeros(mm);
    let mut q2 = Array1::<C64>::zeros(mm);
    let mut q2_hat = Array1::<C64>::zeros(mm);
    let mut q3 = Array1::<C64>::zeros(mm);
    let mut q2_tilde = Array2::<C64>::zeros((mm, mm));
    let mut q3_tilde = Array2::<C64>::zeros((mm, mm));
    let mut q4 = Array2::<C64>::zeros((mm, mm));
    let mut un_sq = 0.0;
    let mut un_mean = C64::default();

    let mut prod = vec![C64::default(); mm];
    for k in 0..=last {
        // weight folds the 1/K mean normalization in
        let w = trap_w(k, last) / steps;
        let x = traj.state(k);
        let u = &x[..m];
        let un = x[n];
        for i in 0..m {
            for j in 0..m {
                prod[i * m + j] = u[i] * u[j];
            }
        }
        for p in 0..mm {
            let cu1 = u[p / m].conj();
            let pb = prod[p].conj();
            q1[p] += w * cu1;
            q2[p] += w * pb;
            q2_hat[p] += w * (un * cu1);
            q3[p] += w * (un * pb);
            for q in 0..mm {
                q2_tilde[(p, q)] += w * (cu1 * u[q / m]);
                q3_tilde[(p, q)] += w * (cu1 * prod[q]);
                q4[(p, q)] += w * (pb * prod[q]);
            }
        }
        un_sq += w * un.norm_sqr();
        un_mean += w * un;
    }

    let ms = MomentSet {
        m,
        mode: n,
        q1,
        q2,
        q2_hat,
        q3,
        q2_tilde,
        q3_tilde,
        q4,
        un_sq,
        un_mean,
    };
    debug_assert!(ms.hermitian_error() < 1e-12 * (1.0 + ms.un_sq));
    ms
}

// ---------------------------------------------------------------------------
// moment recast of the windowed defect
// ---------------------------------------------------------------------------

/// Window coefficients of one mode, scattered into dense pair vectors.
struct WindowVectors {
    d: Array1<C64>,
    d_dtau: Array1<C64>,
    g: Array1<C64>,
    g_dtau: Array1<C64>,
    alpha: C64,
    alpha_dtau: C64,
}

fn window_vectors(em: &EigenModel, n: usize, tau: f64) -> WindowVectors {
    let tc = tau_coeffs(Family::Lia, em, n, tau).expect("windowed family is total");
    let m = em.cutoff;
    let mm = m * m;
    let mut v = WindowVectors {
        d: Array1::zeros(mm),
        d_dtau: Array1::zeros(mm),
        g: Array1::zeros(mm),
        g_dtau: Array1::zeros(mm),
        alpha: tc.alpha,
        alpha_dtau: tc.alpha_dtau,
    };
    for &(i, j, c, dc) in &tc.quad {
        let k = index_of(i as usize, j as usize, m);
        v.d[k] += c;
        v.d_dtau[k] += dc;
    }
    for &(i, j, c, dc) in &tc.gamma {
        let k = index_of(i as usize, j as usize, m);
        v.g[k] += c;
        v.g_dtau[k] += dc;
    }
    v
}

/// Conjugated dot product `Σ conj(x_i) y_i`.
fn cdot(x: &Array1<C64>, y: &Array1<C64>) -> C64 {
    x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum()
}

/// Unnormalized mean-square defect `Q_n(τ)` of the windowed family evaluated
/// through the moment matrices: with `Φ_n = Σ d_p ξ_{p₁}ξ_{p₂} + Σ γ_p ξ_{p₁}
/// + α`, expanding `⟨|u_n − Φ_n|²⟩` gives a ten-term quadratic form in
/// `(d, γ, α)` whose coefficients are the stored moments.
///
/// Agrees with [`defect_qn`] (unnormalized) on the trajectory the moments were
/// collected from, for every τ, up to rounding.
pub fn qn_recast(ms: &MomentSet, em: &EigenModel, n: usize, tau: f64) -> f64 {
    assert_eq!(ms.mode, n, "moment set tracks a different mode");
    assert_eq!(ms.m, em.cutoff, "moment set built over a different resolved count");
    let v = window_vectors(em, n, tau);
    let q4d = ms.q4.dot(&v.d);
    let q3td = ms.q3_tilde.dot(&v.d);
    let q2tg = ms.q2_tilde.dot(&v.g);
    let ca = v.alpha.conj();

    let mut q = cdot(&v.d, &q4d).re;
    q -= 2.0 * cdot(&ms.q3, &v.d).re;
    q += 2.0 * cdot(&v.g, &q3td).re;
    q += cdot(&v.g, &q2tg).re;
    q -= 2.0 * cdot(&ms.q2_hat, &v.g).re;
    q += 2.0 * (ca * cdot(&ms.q2, &v.d)).re;
    q += 2.0 * (ca * cdot(&ms.q1, &v.g)).re;
    q += ms.un_sq;
    q -= 2.0 * (ca * ms.un_mean).re;
    q += v.alpha.norm_sqr();
    q
}

/// Exact τ-derivative `Q_n'(τ)` of [`qn_recast`]: differentiating the
/// quadratic form termwise and folding Hermitian pairs gives twelve real
/// contributions under one common `2 Re(·)`.
pub fn qn_derivative(ms: &MomentSet, em: &EigenModel, n: usize, tau: f64) -> f64 {
    assert_eq!(ms.mode, n, "moment set tracks a different mode");
    assert_eq!(ms.m, em.cutoff, "moment set built over a different resolved count");
    let v = window_vectors(em, n, tau);
    let q4dd = ms.q4.dot(&v.d_dtau);
    let q3td = ms.q3_tilde.dot(&v.d);
    let q3tdd = ms.q3_tilde.dot(&v.d_dtau);
    let q2tgd = ms.q2_tilde.dot(&v.g_dtau);
    let ca = v.alpha.conj();
    let cda = v.alpha_dtau.conj();

    let mut s = cdot(&v.d, &q4dd);
    s -= cdot(&ms.q3, &v.d_dtau);
    s += cdot(&v.g_dtau, &q3td);
    s += cdot(&v.g, &q3tdd);
    s += cdot(&v.g, &q2tgd);
    s -= cdot(&ms.q2_hat, &v.g_dtau);
    s += cda * cdot(&ms.q2, &v.d);
    s += ca * cdot(&ms.q2, &v.d_dtau);
    s += cda * cdot(&ms.q1, &v.g);
    s += ca * cdot(&ms.q1, &v.g_dtau);
    s -= cda * ms.un_mean;
    s += v.alpha_dtau * v.alpha.conj();
    2.0 * s.re
}

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

///Sized-up defect summary of one unresolved mode at its optimized window.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeDefect {
    pub mode: usize,
    /// Optimized backward-integration window for this mode.
    pub tau_star: f64,
    /// Mean-square defect `Q_n` at `tau_star`.
    pub qn: f64,
    /// Variance-budget mismatch `J_n` at `tau_star`.
    pub jn: f64,
    /// Whether `qn` is normalized by the mode energy.
    pub normalized: bool,
}

/// Full diagnostic report of a parameterization on one training trajectory.
#[derive(Debug, Clone)]
pub struct DefectReport {
    pub modes: Vec<ModeDefect>,
    /// Global unresolved defect; `< 1` is the parameterizing-manifold test.
    pub global: f64,
    /// Correlation/angle series between predicted and true unresolved states.
    pub correlation: AngleSeries,
    /// Histogram of the defined correlation angles as `(bin center, density)`.
    pub alpha_histogram: Vec<(f64, f64)>,
}
