//! Per-mode optimization of the backward-integration window τ.
//!
//! The scalar problem solved here, independently for every unresolved mode
//! `n`, is `min_{τ ≥ 0} Q_n(τ)` (or `J_n(τ)`), with the defect evaluated
//! through the trajectory-independent moment recast so each candidate τ costs
//! the same small quadratic-form contraction.
//!
//! Three strategies are layered:
//!
//! * a sign-based gradient descent ([`minimize_scalar_descent`]) — step
//!   against the sign of `Q′`, halve the step whenever it would overshoot
//!   (derivative sign flip) or ascend, stop when `|Q′|` drops below a
//!   tolerance. Cheap and exact-gradient-driven, but local;
//! * a dense grid scan with descent refinement from every local-minimum
//!   bracket ([`minimize_qn_global`]) for the non-convex landscapes that
//!   longer training windows produce;
//! * a smoothed grid minimization ([`minimize_jn`]) for the variance-budget
//!   cost, whose raw curve can carry sharp ripples; a moving average picks
//!   the basin and golden-section refines on the raw values.
//!
//! When several local minimizers score comparably, [`discriminate_by_correlation`]
//! rebuilds the candidate parameterizations and selects the combination whose
//! mean correlation cosine with the true unresolved state is largest.
//!
//! The τ domain is clamped to `[0, τ_max]`; [`default_tau_max`] derives the
//! cap from the decay time of the slowest parameterized mode, beyond which
//! every window coefficient has saturated.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array1, Array2};

use crate::defect::{correlation, qn_derivative, qn_recast, MomentSet, Trajectory};
use crate::error::{Error, Result};
use crate::model::EigenModel;
use crate::param::{lia_build, tau_coeffs, Family, Parameterization};
use crate::C64;

/// Window cap `50/|Re β_{m+1}|`: fifty e-folding times of the slowest
/// unresolved mode, past which all window coefficients are saturated.
pub fn default_tau_max(em: &EigenModel) -> f64 {
    50.0 / em.betas[em.cutoff].re.abs()
}

/// Knobs of the sign-based descent. Defaults: start at τ = 0 with step 0.1,
/// stop once `|Q′| ≤ 1e-10`, give up after 10⁵ iterations, no upper clamp.
#[derive(Debug, Clone)]
pub struct DescentOpts {
    pub tau0: f64,
    pub dtau0: f64,
    pub eps: f64,
    pub max_iter: usize,
    pub tau_max: f64,
}

impl Default for DescentOpts {
    fn default() -> Self {
        DescentOpts {
            tau0: 0.0,
            dtau0: 0.1,
            eps: 1e-10,
            max_iter: 100_000,
            tau_max: f64::INFINITY,
        }
    }
}

impl DescentOpts {
    /// Defaults with the τ-cap derived from the model spectrum.
    pub fn for_model(em: &EigenModel) -> Self {
        DescentOpts { tau_max: default_tau_max(em), ..DescentOpts::default() }
    }
}

/// Outcome of a descent: minimizer, cost there, loop passes used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Descent {
    pub tau: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Sign-based gradient descent on a scalar cost over `[0, τ_max]`.
///
/// Each pass proposes `τ̃ = τ − sign(q′(τ))·δτ`. The proposal is rejected —
/// and the step halved — if the derivative flips sign there while still above
/// the tolerance (the step jumped across the minimum) or if the cost would
/// increase; otherwise it is accepted. Accepted iterates therefore never
/// increase the cost. Terminates when `|q′| ≤ eps`, when the domain boundary
/// pins the iterate, or when the step underflows; exceeding `max_iter`
/// returns [`Error::MaxIterExceeded`] carrying the best τ reached.
pub fn minimize_scalar_descent(
    q: impl Fn(f64) -> f64,
    qprime: impl Fn(f64) -> f64,
    opts: &DescentOpts,
) -> Result<Descent> {
    assert!(opts.dtau0 > 0.0 && opts.eps > 0.0);
    let clamp = |t: f64| t.clamp(0.0, opts.tau_max);
    let mut tau = clamp(opts.tau0);
    let mut dtau = opts.dtau0;
    let mut deriv = qprime(tau);
    let mut value = q(tau);
    let mut iterations = 0;
    while deriv.abs() > opts.eps {
        iterations += 1;
        if iterations > opts.max_iter {
            return Err(Error::MaxIterExceeded { max_iter: opts.max_iter, best_tau: tau });
        }
        let cand = clamp(tau - deriv.signum() * dtau);
        if cand == tau {
            // boundary minimum: the step points out of the domain
            break;
        }
        let cand_deriv = qprime(cand);
        let cand_value = q(cand);
        let overshoot = cand_deriv.abs() > opts.eps && cand_deriv.signum() != deriv.signum();
        if overshoot || cand_value > value {
            dtau *= 0.5;
            if dtau < 1e-15 * (1.0 + tau.abs()) {
                break; // converged as far as f64 resolves
            }
        } else {
            tau = cand;
            deriv = cand_deriv;
            value = cand_value;
        }
    }
    Ok(Descent { tau, value, iterations })
}

/// Sign-based descent on the moment recast of `Q_n`.
pub fn minimize_qn_descent(
    ms: &MomentSet,
    em: &EigenModel,
    n: usize,
    opts: &DescentOpts,
) -> Result<Descent> {
    minimize_scalar_descent(
        |t| qn_recast(ms, em, n, t),
        |t| qn_derivative(ms, em, n, t),
        opts,
    )
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

/// Dense grid scan of a scalar cost over `[0, τ_max]` followed by descent
/// refinement from every strict local-minimum bracket. Returns the distinct
/// local minimizers as `(τ, value)`, sorted ascending by value; grid endpoint
/// minima are reported as-is.
pub fn scan_minima(
    q: impl Fn(f64) -> f64,
    qprime: impl Fn(f64) -> f64,
    tau_max: f64,
    grid_points: usize,
) -> Vec<(f64, f64)> {
    assert!(grid_points >= 3 && tau_max > 0.0);
    let h = tau_max / (grid_points - 1) as f64;
    let grid: Vec<f64> = (0..grid_points).map(|i| i as f64 * h).collect();
    let values: Vec<f64> = grid.iter().map(|&t| q(t)).collect();

    let mut raw = Vec::new();
    for i in 0..grid_points {
        let at_left = i == 0;
        let at_right = i == grid_points - 1;
        if at_left || at_right {
            let inner = if at_left { values[1] } else { values[grid_points - 2] };
            if values[i] <= inner {
                raw.push((grid[i], values[i]));
            }
            continue;
        }
        let le = values[i] <= values[i - 1] && values[i] <= values[i + 1];
        let strict = values[i] < values[i - 1] || values[i] < values[i + 1];
        if le && strict {
            let opts = DescentOpts {
                tau0: grid[i],
                dtau0: h,
                tau_max,
                ..DescentOpts::default()
            };
            let refined = match minimize_scalar_descent(&q, &qprime, &opts) {
                Ok(d) => (d.tau, d.value),
                Err(Error::MaxIterExceeded { best_tau, .. }) => (best_tau, q(best_tau)),
                Err(e) => unreachable!("descent only errs on iteration budget: {e}"),
            };
            raw.push(refined);
        }
    }

    // merge refinements that collapsed into the same basin
    raw.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut distinct: Vec<(f64, f64)> = Vec::new();
    for c in raw {
        match distinct.last_mut() {
            Some(last) if (c.0 - last.0).abs() <= h => {
                if c.1 < last.1 {
                    *last = c;
                }
            }
            _ => distinct.push(c),
        }
    }
    distinct.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    distinct
}

/// Grid-scan-plus-descent minimization of the `Q_n` recast: all distinct
/// local minimizers over `[0, τ_max]`, best first.
pub fn minimize_qn_global(
    ms: &MomentSet,
    em: &EigenModel,
    n: usize,
    tau_max: f64,
    grid_points: usize,
) -> Vec<(f64, f64)> {
    scan_minima(
        |t| qn_recast(ms, em, n, t),
        |t| qn_derivative(ms, em, n, t),
        tau_max,
        grid_points,
    )
}

fn golden_min(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Smoothed grid minimization of a (possibly rippled) scalar cost: evaluate
/// on a dense grid, take a centered moving average of `smooth_width` cells to
/// locate the basin, then refine by golden section on the *raw* cost inside
/// the bracketing cells. The refinement is kept only when it strictly beats
/// the raw grid value, so a flat cost resolves to the smallest τ.
pub fn minimize_smoothed(
    f: impl Fn(f64) -> f64,
    tau_max: f64,
    grid_points: usize,
    smooth_width: usize,
) -> f64 {
    assert!(grid_points >= 3 && tau_max > 0.0);
    let h = tau_max / (grid_points - 1) as f64;
    let raw: Vec<f64> = (0..grid_points).map(|i| f(i as f64 * h)).collect();
    let half = smooth_width.max(1) / 2;
    let smooth: Vec<f64> = (0..grid_points)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(grid_points - 1);
            raw[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let i = argmin(&smooth);
    let lo = i.saturating_sub(1) as f64 * h;
    let hi = (i + 1).min(grid_points - 1) as f64 * h;
    let refined = golden_min(&f, lo, hi, 1e-9 * tau_max.max(1.0));
    if f(refined) < raw[i] {
        refined
    } else {
        i as f64 * h
    }
}

// ---------------------------------------------------------------------------
// variance-budget cost
// ---------------------------------------------------------------------------

/// Cached plain (unconjugated) time moments of one mode's interaction
/// support, making `J_n(τ)` evaluable at any window length at a cost set by
/// the support size instead of the trajectory length.
///
/// With `Φ_n = Σ_p d_p π_p + Σ_g γ_g ξ_g + α` (pairs `p` restricted to the
/// mode's nonzero interactions, `g` to the forcing-coupled resolved indices),
/// the mean of the plain square `Φ_n²` is a quadratic form in the cached
/// moments `⟨π_p π_q⟩`, `⟨π_p ξ_g⟩`, `⟨ξ_g ξ_g'⟩`, `⟨π_p⟩`, `⟨ξ_g⟩`, and
/// `J_n = |⟨u_n²⟩ − ⟨Φ_n²⟩| / ⟨|u_n|²⟩`.
#[derive(Debug, Clone)]
pub struct JnCurve {
    mode: usize,
    pair_slot: BTreeMap<(u32, u32), usize>,
    first_slot: BTreeMap<u32, usize>,
    s: Array2<C64>,
    t: Array2<C64>,
    r: Array2<C64>,
    mp: Array1<C64>,
    mg: Array1<C64>,
    c0: C64,
    den: f64,
}

impl JnCurve {
    /// One trapezoid sweep collecting every moment the support needs.
    pub fn collect(traj: &Trajectory, em: &EigenModel, n: usize) -> Self {
        let m = em.cutoff;
        assert_eq!(traj.dim(), em.dim(), "trajectory/model dimension mismatch");
        assert!(n >= m && n < em.dim(), "mode index outside the unresolved range");

        // structural support: interaction pairs below the cutoff, and the
        // resolved indices that forcing couples linearly; slots numbered in
        // sorted key order so key iteration and slot lookup agree
        let mut pair_keys = BTreeSet::new();
        let mut first_keys = BTreeSet::new();
        for &(k, l, _) in &em.rows[n] {
            if k < m && l < m {
                pair_keys.insert((k as u32, l as u32));
                if em.forcing[l].norm() > 0.0 {
                    first_keys.insert(k as u32);
                }
                if em.forcing[k].norm() > 0.0 {
                    first_keys.insert(l as u32);
                }
            }
        }
        let pair_slot: BTreeMap<(u32, u32), usize> =
            pair_keys.into_iter().enumerate().map(|(s, k)| (k, s)).collect();
        let first_slot: BTreeMap<u32, usize> =
            first_keys.into_iter().enumerate().map(|(s, k)| (k, s)).collect();
        let np = pair_slot.len();
        let ng = first_slot.len();

        let mut s = Array2::<C64>::zeros((np, np));
        let mut t = Array2::<C64>::zeros((np, ng));
        let mut r = Array2::<C64>::zeros((ng, ng));
        let mut mp = Array1::<C64>::zeros(np);
        let mut mg = Array1::<C64>::zeros(ng);
        let mut c0 = C64::default();
        let mut den = 0.0;

        let pairs: Vec<(u32, u32)> = pair_slot.keys().copied().collect();
        let firsts: Vec<u32> = first_slot.keys().copied().collect();
        let last = traj.steps();
        let steps = last as f64;
        let mut pi = vec![C64::default(); np];
        let mut xig = vec![C64::default(); ng];
        for k in 0..=last {
            let w = if k == 0 || k == last { 0.5 } else { 1.0 } / steps;
            let x = traj.state(k);
            for (slot, &(i, j)) in pi.iter_mut().zip(&pairs) {
                *slot = x[i as usize] * x[j as usize];
            }
            for (slot, &g) in xig.iter_mut().zip(&firsts) {
                *slot = x[g as usize];
            }
            for p in 0..np {
                mp[p] += w * pi[p];
                for q in 0..np {
                    s[(p, q)] += w * (pi[p] * pi[q]);
                }
                for g in 0..ng {
                    t[(p, g)] += w * (pi[p] * xig[g]);
                }
            }
            for g in 0..ng {
                mg[g] += w * xig[g];
                for g2 in 0..ng {
                    r[(g, g2)] += w * (xig[g] * xig[g2]);
                }
            }
            c0 += w * (x[n] * x[n]);
            den += w * x[n].norm_sqr();
        }

        JnCurve { mode: n, pair_slot, first_slot, s, t, r, mp, mg, c0, den }
    }

    /// `J_n(τ)` of the windowed family from the cached moments. A mode with
    /// vanishing reference energy scores 0 for every τ.
    pub fn eval(&self, em: &EigenModel, tau: f64) -> f64 {
        if self.den < 1e-300 {
            return 0.0;
        }
        let tc = tau_coeffs(Family::Lia, em, self.mode, tau)
            .expect("windowed family is total");
        let mut d = Array1::<C64>::zeros(self.pair_slot.len());
        for &(i, j, v, _) in &tc.quad {
            d[self.pair_slot[&(i, j)]] += v;
        }
        let mut g = Array1::<C64>::zeros(self.first_slot.len());
        for (&i, &slot) in &self.first_slot {
            g[slot] = tc.linear[i as usize];
        }
        let a = tc.alpha;

        let mut phi2 = a * a;
        phi2 += d.dot(&self.s.dot(&d));
        phi2 += 2.0 * d.dot(&self.t.dot(&g));
        phi2 += g.dot(&self.r.dot(&g));
        phi2 += 2.0 * a * (d.dot(&self.mp) + g.dot(&self.mg));
        (self.c0 - phi2).norm() / self.den
    }
}

/// Smoothed grid minimization of `J_n(τ)` for the windowed family.
pub fn minimize_jn(
    traj: &Trajectory,
    em: &EigenModel,
    n: usize,
    tau_max: f64,
    grid_points: usize,
    smooth_width: usize,
) -> f64 {
    let curve = JnCurve::collect(traj, em, n);
    minimize_smoothed(|t| curve.eval(em, t), tau_max, grid_points, smooth_width)
}

// ---------------------------------------------------------------------------
// candidate discrimination
// ---------------------------------------------------------------------------

/// Winning window combination of [`discriminate_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Chosen τ per unresolved mode, in mode order.
    pub taus: Vec<f64>,
    /// Mean correlation cosine of the winning combination.
    pub mean_c: f64,
    /// Sum of the per-mode costs of the winning combination.
    pub total_q: f64,
}

/// Picks one `(τ, cost)` candidate per mode by rebuilding each combination
/// (restricted to the `k_best` lowest-cost candidates per mode) and comparing
/// the mean correlation cosine between prediction and truth on the training
/// trajectory. Ties (within 1e-12) break toward the smaller total cost.
pub fn discriminate_with(
    traj: &Trajectory,
    candidates: &[Vec<(f64, f64)>],
    k_best: usize,
    mut build: impl FnMut(&[f64]) -> Parameterization,
) -> Selection {
    assert!(!candidates.is_empty(), "no modes to select for");
    assert!(
        candidates.iter().all(|c| !c.is_empty()),
        "every mode needs at least one candidate"
    );
    let k = k_best.max(1);
    let trimmed: Vec<&[(f64, f64)]> =
        candidates.iter().map(|c| &c[..c.len().min(k)]).collect();
    let combos: usize = trimmed.iter().map(|c| c.len()).product();

    let mut best: Option<Selection> = None;
    for ix in 0..combos {
        let mut rem = ix;
        let mut taus = Vec::with_capacity(trimmed.len());
        let mut total_q = 0.0;
        for c in &trimmed {
            taus.push(c[rem % c.len()].0);
            total_q += c[rem % c.len()].1;
            rem /= c.len();
        }
        let p = build(&taus);
        let mut sum = 0.0;
        let mut count = 0usize;
        for (_, c, _) in correlation(traj, &p).defined() {
            sum += c;
            count += 1;
        }
        let mean_c = if count == 0 { -1.0 } else { sum / count as f64 };
        let better = match &best {
            None => true,
            Some(b) => {
                mean_c > b.mean_c + 1e-12
                    || ((mean_c - b.mean_c).abs() <= 1e-12 && total_q < b.total_q)
            }
        };
        if better {
            best = Some(Selection { taus, mean_c, total_q });
        }
    }
    best.expect("at least one combination exists")
}

/// [`discriminate_with`] for the windowed family: candidates are indexed by
/// unresolved mode in order, and each combination is built with `lia_build`.
pub fn discriminate_by_correlation(
    traj: &Trajectory,
    em: &EigenModel,
    candidates: &[Vec<(f64, f64)>],
    k_best: usize,
) -> Selection {
    assert_eq!(
        candidates.len(),
        em.dim() - em.cutoff,
        "one candidate list per unresolved mode"
    );
    discriminate_with(traj, candidates, k_best, |taus| {
        let map: BTreeMap<usize, f64> =
            (em.cutoff..em.dim()).zip(taus.iter().copied()).collect();
        lia_build(em, &map)
    })
}
