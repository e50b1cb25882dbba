//! Closed-form parameterizations of the unresolved modes.
//!
//! Every family maps the resolved amplitudes `ξ ∈ C^m` to a prediction for
//! each unresolved amplitude `x_n`, `n > m`, of a diagonalized quadratic
//! system `dx_n/dt = β_n x_n + Σ B̃ⁿ_{kℓ} x_k x_ℓ + F̃_n`:
//!
//! * **LIA(τ)** — obtained by integrating the resolved equations backward
//!   over a window `τ_n` and the unresolved equation forward again from a
//!   zero initial value. The result is an explicit quadratic polynomial in ξ
//!   whose coefficients are exponential moments of the spectral gaps
//!   (`lia_build`, with `bf_oracle` as the direct numerical counterpart).
//! * **QSA(τ)** — quasi-stationary family: the same backward-forward window
//!   applied with the interaction term frozen at its end-point value, giving
//!   the scalar coefficient `δ_n(τ) = (e^{β_n τ} − 1)/β_n` (`qsa_build`).
//! * **K_τ** — one implicit-Euler step of size τ for the unresolved
//!   equation, coefficient `τ/(1 − β_n τ)` (`ktau_build`).
//! * **IM2 / IM3** — leading-order (and cubic-corrected) invariant-manifold
//!   approximation `B̃ⁿ_{kℓ}/(β_k + β_ℓ − β_n)`, defined under a
//!   non-resonance condition (`im_build`).
//! * **ZERO** — the flat (Galerkin) parameterization `Ψ ≡ 0`.
//!
//! LIA and QSA degenerate to ZERO when every `τ_n = 0`, and LIA tends to IM2
//! for large τ on unforced systems whose interaction gaps all have positive
//! real part. Per-mode windows are independent: mode `n` only ever reads
//! `τ_n`.
//!
//! The τ-families also expose their coefficient bundles together with exact
//! τ-derivatives ([`tau_coeffs`]), which is what the defect-minimization
//! machinery consumes: the defect of a quadratic-polynomial parameterization
//! is a quadratic form in these coefficients, so a window search never has to
//! re-simulate anything.

use std::collections::BTreeMap;

use ndarray::Array1;

use crate::model::EigenModel;
use crate::{cr, C64, Error, Result};

/// Scale factor of the singular-branch threshold: the coefficient formulas
/// switch to their exact-resonance branch when a denominator has modulus
/// below `BRANCH_TOL_SCALE * (1 + |β_n|)`.
pub const BRANCH_TOL_SCALE: f64 = 1e-8;

/// `|μτ|` below which the exponential moments are evaluated by series instead
/// of the closed form, avoiding catastrophic cancellation of `1 − e^{−μτ}`
/// style numerators.
const SERIES_X: f64 = 0.1;

/// Quadratic coefficient matrices denser than this cutoff dimension are kept
/// sparse; below it a dense m×m table is faster and simpler.
pub const DENSE_QUAD_LIMIT: usize = 16;

// ---------------------------------------------------------------------------
// parameterization container
// ---------------------------------------------------------------------------

/// Parameterization family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Backward-forward integral family with per-mode window τ_n.
    Lia,
    /// Quasi-stationary family with per-mode window τ_n.
    Qsa,
    /// Implicit-Euler resolvent family with per-mode step τ_n.
    KTau,
    /// Leading-order invariant-manifold approximation (quadratic).
    Im2,
    /// Invariant-manifold approximation with cubic correction.
    Im3,
    /// Flat parameterization Ψ ≡ 0 (plain Galerkin truncation).
    Zero,
}

impl Family {
    /// Whether the family carries a per-mode window τ_n.
    pub fn has_tau(self) -> bool {
        matches!(self, Family::Lia | Family::Qsa | Family::KTau)
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Lia => "lia",
            Family::Qsa => "qsa",
            Family::KTau => "ktau",
            Family::Im2 => "im2",
            Family::Im3 => "im3",
            Family::Zero => "zero",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "lia" => Family::Lia,
            "qsa" => Family::Qsa,
            "ktau" | "k_tau" | "k-tau" => Family::KTau,
            "im2" | "im" => Family::Im2,
            "im3" => Family::Im3,
            "zero" | "galerkin" => Family::Zero,
            other => {
                return Err(Error::Config(format!(
                    "unknown parameterization family '{other}'"
                )))
            }
        })
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Quadratic coefficient table of one unresolved mode. The entry for `(i, j)`
/// multiplies `ξ_i ξ_j`; the table is not assumed symmetric.
#[derive(Debug, Clone)]
pub enum QuadCoeffs {
    /// Row-major m×m table; entry `i*m + j` multiplies `ξ_i ξ_j`.
    Dense(Vec<C64>),
    /// Sparse `(i, j, value)` triplets; duplicates accumulate.
    Sparse(Vec<(u32, u32, C64)>),
}

impl QuadCoeffs {
    /// Builds the storage from `(i, j, value)` triplets, densifying below
    /// [`DENSE_QUAD_LIMIT`]; duplicate pairs accumulate.
    pub fn from_triplets(m: usize, triplets: Vec<(u32, u32, C64)>) -> Self {
        if m < DENSE_QUAD_LIMIT {
            let mut table = vec![C64::default(); m * m];
            for (i, j, v) in triplets {
                table[i as usize * m + j as usize] += v;
            }
            QuadCoeffs::Dense(table)
        } else {
            QuadCoeffs::Sparse(triplets)
        }
    }

    /// Coefficient of `ξ_i ξ_j` (duplicates summed).
    pub fn get(&self, i: usize, j: usize, m: usize) -> C64 {
        match self {
            QuadCoeffs::Dense(t) => t[i * m + j],
            QuadCoeffs::Sparse(ts) => ts
                .iter()
                .filter(|&&(a, b, _)| a as usize == i && b as usize == j)
                .map(|&(_, _, v)| v)
                .sum(),
        }
    }

    pub fn eval(&self, xi: &[C64]) -> C64 {
        let mut acc = C64::default();
        match self {
            QuadCoeffs::Dense(t) => {
                let m = xi.len();
                debug_assert_eq!(t.len(), m * m);
                for i in 0..m {
                    let mut row = C64::default();
                    for j in 0..m {
                        row += t[i * m + j] * xi[j];
                    }
                    acc += xi[i] * row;
                }
            }
            QuadCoeffs::Sparse(ts) => {
                for &(i, j, v) in ts {
                    acc += v * xi[i as usize] * xi[j as usize];
                }
            }
        }
        acc
    }

    pub fn nnz(&self) -> usize {
        match self {
            QuadCoeffs::Dense(t) => t.iter().filter(|v| v.norm() > 0.0).count(),
            QuadCoeffs::Sparse(ts) => ts.len(),
        }
    }
}

/// Polynomial of one unresolved mode: constant + linear + quadratic (+ cubic
/// for the order-3 invariant-manifold family).
#[derive(Debug, Clone)]
pub struct ModePoly {
    pub constant: C64,
    /// Length-m vector; entry `i` multiplies `ξ_i`.
    pub linear: Vec<C64>,
    pub quad: QuadCoeffs,
    /// Sparse `(i, j, k, value)` cubic terms; empty except for IM3 on models
    /// carrying a cubic tensor.
    pub cubic: Vec<(u32, u32, u32, C64)>,
}

impl ModePoly {
    fn zero(m: usize) -> Self {
        ModePoly {
            constant: C64::default(),
            linear: vec![C64::default(); m],
            quad: QuadCoeffs::from_triplets(m, Vec::new()),
            cubic: Vec::new(),
        }
    }

    pub fn eval(&self, xi: &[C64]) -> C64 {
        let mut acc = self.constant;
        for (c, x) in self.linear.iter().zip(xi) {
            acc += c * x;
        }
        acc += self.quad.eval(xi);
        for &(i, j, k, v) in &self.cubic {
            acc += v * xi[i as usize] * xi[j as usize] * xi[k as usize];
        }
        acc
    }
}

/// A built parameterization: one polynomial per unresolved mode.
///
/// Values are immutable after construction and evaluation is pure, so a
/// single instance may be shared freely across threads.
#[derive(Debug, Clone)]
pub struct Parameterization {
    pub family: Family,
    /// Full state dimension N.
    pub dim: usize,
    /// Number of resolved modes m.
    pub cutoff: usize,
    /// Per-unresolved-mode windows, indexed by `n − m`; all zero for
    /// families without a window.
    pub taus: Vec<f64>,
    /// Per-unresolved-mode polynomials, indexed by `n − m`.
    pub modes: Vec<ModePoly>,
}

impl Parameterization {
    /// Window of unresolved mode `n` (absolute 0-based index, `n ≥ cutoff`).
    pub fn tau(&self, n: usize) -> f64 {
        self.taus[n - self.cutoff]
    }

    /// Number of unresolved modes.
    pub fn unresolved(&self) -> usize {
        self.dim - self.cutoff
    }

    /// Predicted amplitude of unresolved mode `n` at resolved state ξ.
    pub fn eval_mode(&self, n: usize, xi: &[C64]) -> C64 {
        debug_assert_eq!(xi.len(), self.cutoff);
        self.modes[n - self.cutoff].eval(xi)
    }

    /// All unresolved amplitudes at resolved state ξ (length N − m).
    pub fn eval(&self, xi: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::default(); self.unresolved()];
        self.eval_into(xi, &mut out);
        out
    }

    /// Allocation-free form of [`Parameterization::eval`].
    pub fn eval_into(&self, xi: &[C64], out: &mut [C64]) {
        debug_assert_eq!(xi.len(), self.cutoff);
        debug_assert_eq!(out.len(), self.unresolved());
        for (slot, poly) in out.iter_mut().zip(&self.modes) {
            *slot = poly.eval(xi);
        }
    }

    /// Full-space state `ξ ⊕ Ψ(ξ)` in eigen-coordinates (length N).
    pub fn lift(&self, xi: &[C64]) -> Array1<C64> {
        let mut full = Array1::zeros(self.dim);
        for (i, x) in xi.iter().enumerate() {
            full[i] = *x;
        }
        for (t, poly) in self.modes.iter().enumerate() {
            full[self.cutoff + t] = poly.eval(xi);
        }
        full
    }
}

// ---------------------------------------------------------------------------
// exponential moments
// ---------------------------------------------------------------------------

/// Moments `∫_{−τ}^0 s^p e^{μs} ds` for p = 0, 1, 2, evaluated stably.
///
/// Three regimes: an exact-resonance branch (`|μ|` below `sing`, the window
/// monomials `τ, −τ²/2, τ³/3`), a series branch (`|μτ| < 0.1`, where the
/// closed forms lose digits to cancellation), and the closed forms. The
/// τ-derivatives are simply `s^p e^{μs}` at `s = −τ` and are exact for all
/// three branches.
#[derive(Debug, Clone, Copy)]
struct ExpMoments {
    tau: f64,
    /// Singular-branch threshold, `BRANCH_TOL_SCALE * (1 + |β_n|)`.
    sing: f64,
}

impl ExpMoments {
    fn new(tau: f64, beta_n: C64) -> Self {
        ExpMoments {
            tau,
            sing: BRANCH_TOL_SCALE * (1.0 + beta_n.norm()),
        }
    }

    fn is_singular(&self, mu: C64) -> bool {
        mu.norm() < self.sing
    }

    /// Series Σ z^j / (j! (j+p+1)) for z = −μτ, truncated far below double
    /// precision for |z| ≤ 0.1.
    fn series(z: C64, p: u32) -> C64 {
        let mut term = C64::new(1.0, 0.0);
        let mut acc = C64::default();
        for j in 0..12u32 {
            acc += term / cr((j + p + 1) as f64);
            term = term * z / cr((j + 1) as f64);
        }
        acc
    }

    /// `∫_{−τ}^0 e^{μs} ds`.
    fn m0(&self, mu: C64) -> C64 {
        let tau = self.tau;
        if self.is_singular(mu) {
            return cr(tau);
        }
        let x = mu * tau;
        if x.norm() < SERIES_X {
            cr(tau) * Self::series(-x, 0)
        } else {
            (cr(1.0) - (-x).exp()) / mu
        }
    }

    /// `∫_{−τ}^0 s e^{μs} ds`.
    fn m1(&self, mu: C64) -> C64 {
        let tau = self.tau;
        if self.is_singular(mu) {
            return cr(-tau * tau / 2.0);
        }
        let x = mu * tau;
        if x.norm() < SERIES_X {
            cr(-tau * tau) * Self::series(-x, 1)
        } else {
            let emt = (-x).exp();
            cr(tau) * emt / mu - (cr(1.0) - emt) / (mu * mu)
        }
    }

    /// `∫_{−τ}^0 s² e^{μs} ds`.
    fn m2(&self, mu: C64) -> C64 {
        let tau = self.tau;
        if self.is_singular(mu) {
            return cr(tau * tau * tau / 3.0);
        }
        let x = mu * tau;
        if x.norm() < SERIES_X {
            cr(tau * tau * tau) * Self::series(-x, 2)
        } else {
            let emt = (-x).exp();
            let mu2 = mu * mu;
            let mu3 = mu2 * mu;
            cr(2.0) / mu3 - emt * (cr(tau * tau) / mu + cr(2.0 * tau) / mu2 + cr(2.0) / mu3)
        }
    }

    /// `e^{μ·(−τ)}`, the common factor of all three τ-derivatives
    /// (`d/dτ ∫_{−τ}^0 s^p e^{μs} ds = (−τ)^p e^{−μτ}`). Keeps branch
    /// consistency with the values: an exactly-resonant μ is treated as 0.
    fn damp(&self, mu: C64) -> C64 {
        if self.is_singular(mu) {
            cr(1.0)
        } else {
            (-mu * self.tau).exp()
        }
    }

    fn m0_dtau(&self, mu: C64) -> C64 {
        self.damp(mu)
    }

    fn m1_dtau(&self, mu: C64) -> C64 {
        cr(-self.tau) * self.damp(mu)
    }

    fn m2_dtau(&self, mu: C64) -> C64 {
        cr(self.tau * self.tau) * self.damp(mu)
    }
}

/// Quadratic-term coefficient of the backward-forward family:
/// `(1 − e^{−δτ})/δ` with `δ = β_i + β_j − β_n`, or `τ` at exact resonance.
/// Continuous across the branch; near-resonance evaluation is done by series.
pub fn lia_coeff_d(i: usize, j: usize, n: usize, tau: f64, betas: &Array1<C64>) -> C64 {
    assert!(tau >= 0.0, "window must be nonnegative");
    let ints = ExpMoments::new(tau, betas[n]);
    ints.m0(betas[i] + betas[j] - betas[n])
}

// ---------------------------------------------------------------------------
// per-mode coefficient assembly
// ---------------------------------------------------------------------------

/// Coefficient bundle of one unresolved mode of a τ-family, together with the
/// exact τ-derivative of every coefficient. `quad` triplets run over the
/// nonzero interactions `B̃ⁿ_{kℓ}` with `k, ℓ < m` only.
#[derive(Debug, Clone)]
pub struct TauCoeffs {
    /// Absolute unresolved mode index n (0-based).
    pub mode: usize,
    pub cutoff: usize,
    pub tau: f64,
    pub alpha: C64,
    pub alpha_dtau: C64,
    /// Length-m linear coefficients and their τ-derivatives.
    pub linear: Vec<C64>,
    pub linear_dtau: Vec<C64>,
    /// `(i, j, value, d value/dτ)` sparse quadratic coefficients.
    pub quad: Vec<(u32, u32, C64, C64)>,
    /// Pair-resolved form of the linear part: entry `(i, j, v, dv)` is the
    /// contribution to `ξ_i` arising from interaction pair `(i, j)`. Folding
    /// over `j` reproduces `linear`; the moment-matrix defect recast needs
    /// the unfolded pairs.
    pub gamma: Vec<(u32, u32, C64, C64)>,
}

impl TauCoeffs {
    /// Direct polynomial evaluation at a resolved state.
    pub fn eval(&self, xi: &[C64]) -> C64 {
        let mut acc = self.alpha;
        for (c, x) in self.linear.iter().zip(xi) {
            acc += c * x;
        }
        for &(i, j, v, _) in &self.quad {
            acc += v * xi[i as usize] * xi[j as usize];
        }
        acc
    }

    /// τ-derivative of the polynomial at a resolved state.
    pub fn eval_dtau(&self, xi: &[C64]) -> C64 {
        let mut acc = self.alpha_dtau;
        for (c, x) in self.linear_dtau.iter().zip(xi) {
            acc += c * x;
        }
        for &(i, j, _, dv) in &self.quad {
            acc += dv * xi[i as usize] * xi[j as usize];
        }
        acc
    }
}

/// Sparse row of mode `n` restricted to resolved×resolved interactions.
fn low_row(em: &EigenModel, n: usize) -> Vec<(usize, usize, C64)> {
    let m = em.cutoff;
    if n >= em.band {
        return Vec::new();
    }
    em.rows[n]
        .iter()
        .copied()
        .filter(|&(k, l, _)| k < m && l < m)
        .collect()
}

fn lia_mode(em: &EigenModel, n: usize, tau: f64) -> TauCoeffs {
    let m = em.cutoff;
    let betas = &em.betas;
    let bn = betas[n];
    let ints = ExpMoments::new(tau, bn);

    // gaps: δ_i = β_i − β_n for resolved i, δ_0 = −β_n
    let d0 = -bn;
    let gap: Vec<C64> = (0..m).map(|i| betas[i] - bn).collect();
    // per-gap moments reused across all interaction pairs of this mode
    let e_gap: Vec<C64> = gap.iter().map(|&g| ints.m0(g)).collect();
    let w_gap: Vec<C64> = gap.iter().map(|&g| ints.m1(g)).collect();
    let de_gap: Vec<C64> = gap.iter().map(|&g| ints.m0_dtau(g)).collect();
    let dw_gap: Vec<C64> = gap.iter().map(|&g| ints.m1_dtau(g)).collect();
    let (e0, w0, w20) = (ints.m0(d0), ints.m1(d0), ints.m2(d0));
    let (de0, dw0, dw20) = (ints.m0_dtau(d0), ints.m1_dtau(d0), ints.m2_dtau(d0));

    let mut alpha = e0 * em.forcing[n];
    let mut alpha_dtau = de0 * em.forcing[n];
    let mut linear = vec![C64::default(); m];
    let mut linear_dtau = vec![C64::default(); m];
    let mut quad = Vec::new();
    let mut gamma = Vec::new();

    for &(k, l, b) in &low_row(em, n) {
        let dkl = betas[k] + betas[l] - bn;
        let (e_kl, de_kl) = (ints.m0(dkl), ints.m0_dtau(dkl));

        // quadratic: (1 − e^{−δ_kl τ})/δ_kl · B̃ⁿ_{kℓ}
        quad.push((k as u32, l as u32, e_kl * b, de_kl * b));

        let (zk, zl) = (ints.is_singular(betas[k]), ints.is_singular(betas[l]));

        // constant: U_{kℓ} B̃ⁿ_{kℓ} F̃_k F̃_ℓ, with U branching on which of
        // β_k, β_ℓ vanish (the resolved forcing enters through the
        // non-exponential part of the backward solution)
        let ff = em.forcing[k] * em.forcing[l];
        if ff.norm() > 0.0 {
            let (u, du) = match (zk, zl) {
                (false, false) => {
                    let inv = cr(1.0) / (betas[k] * betas[l]);
                    (
                        (e_kl - e_gap[k] - e_gap[l] + e0) * inv,
                        (de_kl - de_gap[k] - de_gap[l] + de0) * inv,
                    )
                }
                (false, true) => (
                    (w_gap[k] - w0) / betas[k],
                    (dw_gap[k] - dw0) / betas[k],
                ),
                (true, false) => (
                    (w_gap[l] - w0) / betas[l],
                    (dw_gap[l] - dw0) / betas[l],
                ),
                (true, true) => (w20, dw20),
            };
            alpha += u * b * ff;
            alpha_dtau += du * b * ff;
        }

        // linear: V_{kℓ} F̃_ℓ ξ_k and V_{ℓk} F̃_k ξ_ℓ — the two cross terms
        // of the interaction between a propagated mode and a forced mode
        if em.forcing[l].norm() > 0.0 {
            let (v, dv) = if zl {
                (w_gap[k], dw_gap[k])
            } else {
                ((e_kl - e_gap[k]) / betas[l], (de_kl - de_gap[k]) / betas[l])
            };
            linear[k] += v * em.forcing[l] * b;
            linear_dtau[k] += dv * em.forcing[l] * b;
            gamma.push((k as u32, l as u32, v * em.forcing[l] * b, dv * em.forcing[l] * b));
        }
        if em.forcing[k].norm() > 0.0 {
            let (v, dv) = if zk {
                (w_gap[l], dw_gap[l])
            } else {
                ((e_kl - e_gap[l]) / betas[k], (de_kl - de_gap[l]) / betas[k])
            };
            linear[l] += v * em.forcing[k] * b;
            linear_dtau[l] += dv * em.forcing[k] * b;
            gamma.push((l as u32, k as u32, v * em.forcing[k] * b, dv * em.forcing[k] * b));
        }
    }

    TauCoeffs {
        mode: n,
        cutoff: m,
        tau,
        alpha,
        alpha_dtau,
        linear,
        linear_dtau,
        quad,
        gamma,
    }
}

fn qsa_mode(em: &EigenModel, n: usize, tau: f64) -> TauCoeffs {
    let m = em.cutoff;
    let bn = em.betas[n];
    let ints = ExpMoments::new(tau, bn);
    // δ_n(τ) = (e^{β_n τ} − 1)/β_n, i.e. the zeroth moment at gap −β_n
    let (delta, ddelta) = (ints.m0(-bn), ints.m0_dtau(-bn));

    let quad = low_row(em, n)
        .iter()
        .map(|&(k, l, b)| (k as u32, l as u32, delta * b, ddelta * b))
        .collect();

    TauCoeffs {
        mode: n,
        cutoff: m,
        tau,
        alpha: delta * em.forcing[n],
        alpha_dtau: ddelta * em.forcing[n],
        linear: vec![C64::default(); m],
        linear_dtau: vec![C64::default(); m],
        quad,
        gamma: Vec::new(),
    }
}

fn ktau_mode(em: &EigenModel, n: usize, tau: f64) -> Result<TauCoeffs> {
    let m = em.cutoff;
    let bn = em.betas[n];
    let denom = cr(1.0) - bn * tau;
    if denom.norm() <= 1e-12 * (1.0 + bn.norm() * tau) {
        return Err(Error::SingularResolvent { mode: n, tau });
    }
    let c = cr(tau) / denom;
    let dc = cr(1.0) / (denom * denom);

    let quad = low_row(em, n)
        .iter()
        .map(|&(k, l, b)| (k as u32, l as u32, c * b, dc * b))
        .collect();

    Ok(TauCoeffs {
        mode: n,
        cutoff: m,
        tau,
        alpha: c * em.forcing[n],
        alpha_dtau: dc * em.forcing[n],
        linear: vec![C64::default(); m],
        linear_dtau: vec![C64::default(); m],
        quad,
        gamma: Vec::new(),
    })
}

/// Coefficient bundle (values and τ-derivatives) of one unresolved mode for
/// a τ-family. Errors for families without a window.
pub fn tau_coeffs(family: Family, em: &EigenModel, n: usize, tau: f64) -> Result<TauCoeffs> {
    assert!(tau >= 0.0, "window must be nonnegative");
    assert!(
        n >= em.cutoff && n < em.dim(),
        "mode index must be unresolved"
    );
    match family {
        Family::Lia => Ok(lia_mode(em, n, tau)),
        Family::Qsa => Ok(qsa_mode(em, n, tau)),
        Family::KTau => ktau_mode(em, n, tau),
        other => Err(Error::Config(format!(
            "family '{other}' carries no window to differentiate"
        ))),
    }
}

// ---------------------------------------------------------------------------
// family builders
// ---------------------------------------------------------------------------

fn dense_taus(em: &EigenModel, taus: &BTreeMap<usize, f64>) -> Vec<f64> {
    let (m, n) = (em.cutoff, em.dim());
    for (&mode, &tau) in taus {
        assert!(
            mode >= m && mode < n,
            "window specified for mode {mode}, which is not unresolved"
        );
        assert!(tau >= 0.0, "window must be nonnegative");
    }
    (m..n).map(|k| taus.get(&k).copied().unwrap_or(0.0)).collect()
}

fn poly_from_coeffs(m: usize, c: &TauCoeffs) -> ModePoly {
    ModePoly {
        constant: c.alpha,
        linear: c.linear.clone(),
        quad: QuadCoeffs::from_triplets(
            m,
            c.quad.iter().map(|&(i, j, v, _)| (i, j, v)).collect(),
        ),
        cubic: Vec::new(),
    }
}

/// Build the backward-forward family at the given per-mode windows (modes
/// absent from the map default to τ = 0, i.e. to the flat parameterization).
pub fn lia_build(em: &EigenModel, taus: &BTreeMap<usize, f64>) -> Parameterization {
    let (m, n) = (em.cutoff, em.dim());
    let dense = dense_taus(em, taus);
    let modes = (m..n)
        .map(|k| poly_from_coeffs(m, &lia_mode(em, k, dense[k - m])))
        .collect();
    Parameterization {
        family: Family::Lia,
        dim: n,
        cutoff: m,
        taus: dense,
        modes,
    }
}

/// Build the quasi-stationary family at the given per-mode windows.
pub fn qsa_build(em: &EigenModel, taus: &BTreeMap<usize, f64>) -> Parameterization {
    let (m, n) = (em.cutoff, em.dim());
    let dense = dense_taus(em, taus);
    let modes = (m..n)
        .map(|k| poly_from_coeffs(m, &qsa_mode(em, k, dense[k - m])))
        .collect();
    Parameterization {
        family: Family::Qsa,
        dim: n,
        cutoff: m,
        taus: dense,
        modes,
    }
}

/// Build the implicit-Euler resolvent family at the given per-mode steps.
pub fn ktau_build(em: &EigenModel, taus: &BTreeMap<usize, f64>) -> Result<Parameterization> {
    let (m, n) = (em.cutoff, em.dim());
    let dense = dense_taus(em, taus);
    let modes = (m..n)
        .map(|k| Ok(poly_from_coeffs(m, &ktau_mode(em, k, dense[k - m])?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Parameterization {
        family: Family::KTau,
        dim: n,
        cutoff: m,
        taus: dense,
        modes,
    })
}

/// Build the flat (Galerkin) parameterization.
pub fn zero_build(em: &EigenModel) -> Parameterization {
    let (m, n) = (em.cutoff, em.dim());
    Parameterization {
        family: Family::Zero,
        dim: n,
        cutoff: m,
        taus: vec![0.0; n - m],
        modes: (m..n).map(|_| ModePoly::zero(m)).collect(),
    }
}

/// Default absolute tolerance of the non-resonance check in [`im_build`].
pub const DEFAULT_NR_TOL: f64 = 1e-8;

/// Build the invariant-manifold approximation of the given order (2 or 3)
/// with the default non-resonance tolerance.
pub fn im_build(em: &EigenModel, order: usize) -> Result<Parameterization> {
    im_build_with(em, order, DEFAULT_NR_TOL)
}

/// [`im_build`] with an explicit non-resonance tolerance: every index tuple
/// with a nonzero interaction coefficient must keep its resonance denominator
/// `Σ β_{i_p} − β_n` above `nr_tol` in modulus. Tuples whose coefficient is
/// exactly zero are exempt; a vanishing denominator there leaves the monomial
/// coefficient undetermined, and this implementation sets it to zero.
pub fn im_build_with(em: &EigenModel, order: usize, nr_tol: f64) -> Result<Parameterization> {
    assert!(order == 2 || order == 3, "order must be 2 or 3");
    let (m, n) = (em.cutoff, em.dim());
    let betas = &em.betas;

    let mut violations: Vec<(Vec<usize>, usize)> = Vec::new();
    let mut modes = Vec::with_capacity(n - m);
    for out in m..n {
        let bn = betas[out];
        let mut triplets = Vec::new();
        for &(k, l, b) in &low_row(em, out) {
            if b.norm() == 0.0 {
                continue;
            }
            let denom = betas[k] + betas[l] - bn;
            if denom.norm() <= nr_tol {
                violations.push((vec![k, l], out));
                continue;
            }
            triplets.push((k as u32, l as u32, b / denom));
        }
        let mut cubic = Vec::new();
        if order == 3 && out < em.band {
            for &(i, j, k, g) in em.cubic_rows.get(out).map(Vec::as_slice).unwrap_or(&[]) {
                if i >= m || j >= m || k >= m || g.norm() == 0.0 {
                    continue;
                }
                let denom = betas[i] + betas[j] + betas[k] - bn;
                if denom.norm() <= nr_tol {
                    violations.push((vec![i, j, k], out));
                    continue;
                }
                cubic.push((i as u32, j as u32, k as u32, g / denom));
            }
        }
        modes.push(ModePoly {
            constant: C64::default(),
            linear: vec![C64::default(); m],
            quad: QuadCoeffs::from_triplets(m, triplets),
            cubic,
        });
    }

    if !violations.is_empty() {
        let first = violations[0].clone();
        return Err(Error::ResonanceViolation {
            tuples: violations,
            first,
        });
    }

    Ok(Parameterization {
        family: if order == 2 { Family::Im2 } else { Family::Im3 },
        dim: n,
        cutoff: m,
        taus: vec![0.0; n - m],
        modes,
    })
}

// ---------------------------------------------------------------------------
// backward-forward numerical oracle
// ---------------------------------------------------------------------------

/// Direct numerical value of the backward-forward construction for one mode.
///
/// The resolved history over `[−τ, 0]` is the closed-form solution of the
/// linear resolved equations ending at ξ (exact, since they decouple and
/// carry constant forcing); the unresolved equation is then integrated
/// forward from `y_n(−τ) = 0` with classical RK4 in `steps` steps. Converges
/// to the `lia_build` polynomial at rate `steps⁻⁴`.
pub fn bf_oracle(em: &EigenModel, n: usize, tau: f64, xi: &[C64], steps: usize) -> C64 {
    assert!(steps >= 100, "oracle needs at least 100 steps");
    assert!(tau >= 0.0, "window must be nonnegative");
    let m = em.cutoff;
    assert_eq!(xi.len(), m, "resolved state must have length m");
    assert!(n >= m && n < em.dim(), "mode index must be unresolved");
    if tau == 0.0 {
        return C64::default();
    }

    let betas = &em.betas;
    let bn = betas[n];
    let ints = ExpMoments::new(tau, bn);
    let row = low_row(em, n);

    // resolved history: y_k(s) = e^{β_k s} ξ_k + γ_k(s) F̃_k with
    // γ_k(s) = (e^{β_k s} − 1)/β_k (or s at β_k = 0)
    let low = |s: f64| -> Vec<C64> {
        (0..m)
            .map(|k| {
                let ebs = (betas[k] * s).exp();
                let gamma = if ints.is_singular(betas[k]) {
                    cr(s)
                } else {
                    (ebs - cr(1.0)) / betas[k]
                };
                ebs * xi[k] + gamma * em.forcing[k]
            })
            .collect()
    };

    // unresolved source at backward time s
    let src = |s: f64| -> C64 {
        let yc = low(s);
        let mut acc = em.forcing[n];
        for &(k, l, b) in &row {
            acc += b * yc[k] * yc[l];
        }
        acc
    };

    let h = tau / steps as f64;
    let mut y = C64::default();
    let mut s = -tau;
    for _ in 0..steps {
        let f = |sv: f64, yv: C64| bn * yv + src(sv);
        let k1 = f(s, y);
        let k2 = f(s + 0.5 * h, y + cr(0.5 * h) * k1);
        let k3 = f(s + 0.5 * h, y + cr(0.5 * h) * k2);
        let k4 = f(s + h, y + cr(h) * k3);
        y += cr(h / 6.0) * (k1 + cr(2.0) * k2 + cr(2.0) * k3 + k4);
        s += h;
    }
    y
}
