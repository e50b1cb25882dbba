//! Reduced closure field and its integrators.
//!
//! Given a model in eigen-coordinates and a parameterization of the
//! unresolved modes, the closure is the m-dimensional field obtained by
//! substituting `u = x ⊕ Φ(x)` into the full right-hand side and keeping the
//! resolved block:
//!
//! ```text
//! ẋ_j = β_j x_j + Σ_{k,ℓ<m} B̃ʲ_{kℓ} x_k x_ℓ
//!              + Σ_{k<m≤ℓ} B̃ʲ_{kℓ} x_k Φ_ℓ(x) + Σ_{ℓ<m≤k} B̃ʲ_{kℓ} Φ_k(x) x_ℓ
//!              + Σ_{k,ℓ≥m} B̃ʲ_{kℓ} Φ_k(x) Φ_ℓ(x) + F̃_j .
//! ```
//!
//! Two evaluation engines sit behind one interface. For small resolved
//! dimension the cross and high-high sums are precontracted against Φ's
//! coefficient arrays into one dense degree-4 polynomial per resolved mode,
//! so a step costs m⁴ multiply-adds with no indirection. Past
//! [`CONTRACT_LIMIT`] — or whenever cubic terms (model or parameterization)
//! would push the tables to degree six — Φ is evaluated once per step and
//! contracted against the sparse interaction rows instead.
//!
//! Integration is fixed-step: classical RK4, and the semi-implicit Euler
//! scheme that treats the diagonal linear part implicitly (the stiff
//! unresolved decay rates are gone from the closure, but the resolved β can
//! still be stiff for spectral models). Both abort with
//! [`Error::NonFinite`] as soon as any component leaves [`BLOWUP_ABS`] —
//! standard quasi-stationary closures are expected to blow up in finite
//! time, and the caller needs the step index, not a panic.

use ndarray::Array1;

use crate::defect::Trajectory;
use crate::error::{Error, Result};
use crate::model::{EigenModel, SpectralBasis};
use crate::param::{ModePoly, Parameterization, QuadCoeffs};
use crate::C64;

/// Resolved dimension above which the closure stops precontracting the
/// degree-4 tables (size m⁴ each) and evaluates Φ per step instead.
pub const CONTRACT_LIMIT: usize = 16;

/// Abort threshold for integrations: any `|x_j|` beyond this (or non-finite)
/// counts as blow-up.
pub const BLOWUP_ABS: f64 = 1e12;

/// Dense polynomial of total degree ≤ 4 over the resolved coordinates.
///
/// Term order is row-major over repeated index tuples — the tables are not
/// symmetrized, duplicate tuples simply accumulate. Degree-3 and -4 sums are
/// contracted against precomputed pair products, so evaluation costs
/// `O(m⁴)` multiply-adds.
struct Quartic {
    c0: C64,
    c1: Vec<C64>,
    c2: Vec<C64>,
    c3: Vec<C64>,
    c4: Vec<C64>,
}

impl Quartic {
    fn zero(m: usize) -> Self {
        Quartic {
            c0: C64::default(),
            c1: vec![C64::default(); m],
            c2: vec![C64::default(); m * m],
            c3: vec![C64::default(); m * m * m],
            c4: vec![C64::default(); m * m * m * m],
        }
    }

    /// Evaluate given the state and its pair products `pp[i*m + j] = x_i x_j`.
    fn eval(&self, x: &[C64], pp: &[C64]) -> C64 {
        let m = x.len();
        let mm = m * m;
        let mut acc = self.c0;
        for (c, xv) in self.c1.iter().zip(x) {
            acc += c * xv;
        }
        for (c, p) in self.c2.iter().zip(pp) {
            acc += c * p;
        }
        for (pi, p) in pp.iter().enumerate() {
            let row = &self.c3[pi * m..(pi + 1) * m];
            let mut s = C64::default();
            for (c, xv) in row.iter().zip(x) {
                s += c * xv;
            }
            acc += p * s;
        }
        for (pi, p) in pp.iter().enumerate() {
            let row = &self.c4[pi * mm..(pi + 1) * mm];
            let mut s = C64::default();
            for (c, q) in row.iter().zip(pp) {
                s += c * q;
            }
            acc += p * s;
        }
        acc
    }
}

fn visit_quad(q: &QuadCoeffs, m: usize, mut f: impl FnMut(usize, usize, C64)) {
    match q {
        QuadCoeffs::Dense(t) => {
            for i in 0..m {
                for j in 0..m {
                    let v = t[i * m + j];
                    if v.norm_sqr() > 0.0 {
                        f(i, j, v);
                    }
                }
            }
        }
        QuadCoeffs::Sparse(ts) => {
            for &(i, j, v) in ts {
                f(i as usize, j as usize, v);
            }
        }
    }
}

enum Engine {
    /// One precontracted degree-4 polynomial per resolved mode.
    Contracted(Vec<Quartic>),
    /// Per-step Φ evaluation against the sparse interaction rows.
    Lifted,
}

/// The reduced closure field `ẋ = βx + N(x)` over the resolved block.
///
/// The linear part stays split out as `diag β` so the semi-implicit
/// integrator can treat exactly it implicitly; the polynomial remainder
/// `N(x)` carries the forcing and every Φ-induced term.
pub struct Closure<'a> {
    em: &'a EigenModel,
    param: &'a Parameterization,
    engine: Engine,
}

/// Reusable per-run buffers for closure evaluation.
pub struct ClosureWorkspace {
    /// Pair products `x_i x_j` (contracted engine).
    pp: Vec<C64>,
    /// Unresolved amplitudes Φ(x) (lifted engine).
    phi: Vec<C64>,
    /// Lifted state `x ⊕ Φ(x)` (lifted engine).
    u: Vec<C64>,
}

impl<'a> Closure<'a> {
    /// Assemble the closure; precontracts when the resolved dimension is
    /// below [`CONTRACT_LIMIT`] and every term is at most quadratic.
    pub fn new(em: &'a EigenModel, param: &'a Parameterization) -> Self {
        assert_eq!(param.dim, em.dim(), "parameterization/model dimension mismatch");
        assert_eq!(param.cutoff, em.cutoff, "parameterization/model cutoff mismatch");
        let m = em.cutoff;
        let cubic_model = (0..m.min(em.band))
            .any(|j| em.cubic_rows.get(j).is_some_and(|r| !r.is_empty()));
        let cubic_param = param.modes.iter().any(|p| !p.cubic.is_empty());
        let engine = if m < CONTRACT_LIMIT && !cubic_model && !cubic_param {
            Engine::Contracted(contract(em, param))
        } else {
            Engine::Lifted
        };
        Closure { em, param, engine }
    }

    /// Resolved dimension of the field.
    pub fn dim(&self) -> usize {
        self.em.cutoff
    }

    pub fn workspace(&self) -> ClosureWorkspace {
        let m = self.em.cutoff;
        ClosureWorkspace {
            pp: vec![C64::default(); m * m],
            phi: vec![C64::default(); self.param.unresolved()],
            u: vec![C64::default(); self.em.dim()],
        }
    }

    fn eval_into(&self, x: &[C64], work: &mut ClosureWorkspace, out: &mut [C64], linear: bool) {
        let m = self.em.cutoff;
        debug_assert_eq!(x.len(), m);
        debug_assert_eq!(out.len(), m);
        match &self.engine {
            Engine::Contracted(polys) => {
                for i in 0..m {
                    for j in 0..m {
                        work.pp[i * m + j] = x[i] * x[j];
                    }
                }
                for (j, poly) in polys.iter().enumerate() {
                    let lin = if linear { self.em.betas[j] * x[j] } else { C64::default() };
                    out[j] = lin + poly.eval(x, &work.pp);
                }
            }
            Engine::Lifted => {
                self.param.eval_into(x, &mut work.phi);
                work.u[..m].copy_from_slice(x);
                work.u[m..].copy_from_slice(&work.phi);
                for (j, slot) in out.iter_mut().enumerate() {
                    let mut acc = self.em.forcing[j];
                    if linear {
                        acc += self.em.betas[j] * x[j];
                    }
                    if j < self.em.band {
                        for &(k, l, v) in &self.em.rows[j] {
                            acc += v * work.u[k] * work.u[l];
                        }
                        for &(p, q, r, v) in
                            self.em.cubic_rows.get(j).map(Vec::as_slice).unwrap_or(&[])
                        {
                            acc += v * work.u[p] * work.u[q] * work.u[r];
                        }
                    }
                    *slot = acc;
                }
            }
        }
    }

    /// Full closure field `βx + N(x)`, allocation-free.
    pub fn rhs_into(&self, x: &[C64], work: &mut ClosureWorkspace, out: &mut [C64]) {
        self.eval_into(x, work, out, true);
    }

    /// Full closure field, allocating convenience form.
    pub fn rhs(&self, x: &[C64]) -> Array1<C64> {
        let mut work = self.workspace();
        let mut out = vec![C64::default(); self.dim()];
        self.rhs_into(x, &mut work, &mut out);
        Array1::from_vec(out)
    }

    /// Polynomial remainder `N(x)` alone (forcing included, `βx` excluded) —
    /// the explicit part of the semi-implicit scheme.
    pub fn nonlinear_into(&self, x: &[C64], work: &mut ClosureWorkspace, out: &mut [C64]) {
        self.eval_into(x, work, out, false);
    }

    /// Classical RK4 on the closure field.
    pub fn integrate_rk4(
        &self,
        x0: &[C64],
        t0: f64,
        dt: f64,
        steps: usize,
    ) -> Result<Trajectory> {
        let mut work = self.workspace();
        integrate_rk4(
            |_, x: &[C64], out: &mut [C64]| self.rhs_into(x, &mut work, out),
            x0,
            t0,
            dt,
            steps,
        )
    }

    /// Semi-implicit Euler on the closure field: the diagonal `β` implicitly,
    /// the polynomial remainder explicitly.
    pub fn integrate_semi_implicit(
        &self,
        x0: &[C64],
        t0: f64,
        dt: f64,
        steps: usize,
    ) -> Result<Trajectory> {
        let mut work = self.workspace();
        let betas: Vec<C64> = self.em.betas.iter().take(self.dim()).copied().collect();
        integrate_semi_implicit(
            &betas,
            |_, x: &[C64], out: &mut [C64]| self.nonlinear_into(x, &mut work, out),
            x0,
            t0,
            dt,
            steps,
        )
    }
}

/// Expand `Π_c[B̃(x ⊕ Φ(x), x ⊕ Φ(x))] + F̃_c` into dense degree-4 tables.
fn contract(em: &EigenModel, param: &Parameterization) -> Vec<Quartic> {
    let m = em.cutoff;
    let phi = |l: usize| -> &ModePoly { &param.modes[l - m] };
    (0..m)
        .map(|j| {
            let mut p = Quartic::zero(m);
            p.c0 = em.forcing[j];
            if j >= em.band {
                return p;
            }
            for &(k, l, b) in &em.rows[j] {
                match (k < m, l < m) {
                    (true, true) => p.c2[k * m + l] += b,
                    // x_k · Φ_ℓ(x)
                    (true, false) => {
                        let f = phi(l);
                        p.c1[k] += b * f.constant;
                        for (i, g) in f.linear.iter().enumerate() {
                            p.c2[k * m + i] += b * g;
                        }
                        visit_quad(&f.quad, m, |i, q, v| {
                            p.c3[(k * m + i) * m + q] += b * v;
                        });
                    }
                    // Φ_k(x) · x_ℓ
                    (false, true) => {
                        let f = phi(k);
                        p.c1[l] += b * f.constant;
                        for (i, g) in f.linear.iter().enumerate() {
                            p.c2[i * m + l] += b * g;
                        }
                        visit_quad(&f.quad, m, |i, q, v| {
                            p.c3[(i * m + q) * m + l] += b * v;
                        });
                    }
                    // Φ_k(x) · Φ_ℓ(x)
                    (false, false) => {
                        let (fk, fl) = (phi(k), phi(l));
                        p.c0 += b * fk.constant * fl.constant;
                        for (i, g) in fl.linear.iter().enumerate() {
                            p.c1[i] += b * fk.constant * g;
                        }
                        for (i, g) in fk.linear.iter().enumerate() {
                            p.c1[i] += b * fl.constant * g;
                        }
                        for (i, gk) in fk.linear.iter().enumerate() {
                            for (q, gl) in fl.linear.iter().enumerate() {
                                p.c2[i * m + q] += b * gk * gl;
                            }
                        }
                        visit_quad(&fl.quad, m, |i, q, v| {
                            p.c2[i * m + q] += b * fk.constant * v;
                        });
                        visit_quad(&fk.quad, m, |i, q, v| {
                            p.c2[i * m + q] += b * fl.constant * v;
                        });
                        visit_quad(&fl.quad, m, |i, q, v| {
                            for (g, gk) in fk.linear.iter().enumerate() {
                                p.c3[(g * m + i) * m + q] += b * gk * v;
                            }
                        });
                        visit_quad(&fk.quad, m, |i, q, v| {
                            for (g, gl) in fl.linear.iter().enumerate() {
                                p.c3[(i * m + q) * m + g] += b * v * gl;
                            }
                        });
                        visit_quad(&fk.quad, m, |i, q, vk| {
                            visit_quad(&fl.quad, m, |r, s, vl| {
                                p.c4[((i * m + q) * m + r) * m + s] += b * vk * vl;
                            });
                        });
                    }
                }
            }
            p
        })
        .collect()
}

fn guard(x: &[C64], step: usize) -> Result<()> {
    for v in x {
        let a = v.norm();
        if !a.is_finite() || a > BLOWUP_ABS {
            return Err(Error::NonFinite { step, magnitude: a });
        }
    }
    Ok(())
}

/// Classical fixed-step RK4 on `ẋ = f(t, x)`, recording every step boundary.
///
/// Aborts with [`Error::NonFinite`] — carrying the index of the offending
/// step — as soon as any component is non-finite or beyond [`BLOWUP_ABS`].
pub fn integrate_rk4<F>(
    mut f: F,
    x0: &[C64],
    t0: f64,
    dt: f64,
    steps: usize,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let n = x0.len();
    guard(x0, 0)?;
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(Array1::from_vec(x0.to_vec()));

    let mut x = x0.to_vec();
    let mut k1 = vec![C64::default(); n];
    let mut k2 = vec![C64::default(); n];
    let mut k3 = vec![C64::default(); n];
    let mut k4 = vec![C64::default(); n];
    let mut stage = vec![C64::default(); n];
    for s in 0..steps {
        let t = t0 + s as f64 * dt;
        f(t, &x, &mut k1);
        for i in 0..n {
            stage[i] = x[i] + 0.5 * dt * k1[i];
        }
        f(t + 0.5 * dt, &stage, &mut k2);
        for i in 0..n {
            stage[i] = x[i] + 0.5 * dt * k2[i];
        }
        f(t + 0.5 * dt, &stage, &mut k3);
        for i in 0..n {
            stage[i] = x[i] + dt * k3[i];
        }
        f(t + dt, &stage, &mut k4);
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        guard(&x, s + 1)?;
        samples.push(Array1::from_vec(x.clone()));
    }
    Ok(Trajectory::new(dt, t0, samples))
}

/// Semi-implicit Euler with diagonal implicit linear part:
/// `x_{k+1} = (I − dt·diag β)⁻¹ (x_k + dt·N(t_k, x_k))`.
///
/// The solve is component-wise since the linear part is diagonal in
/// eigen-coordinates. Blow-up handling matches [`integrate_rk4`].
pub fn integrate_semi_implicit<F>(
    betas: &[C64],
    mut nonlinear: F,
    x0: &[C64],
    t0: f64,
    dt: f64,
    steps: usize,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let n = x0.len();
    assert_eq!(betas.len(), n, "one decay rate per component");
    guard(x0, 0)?;
    let inv: Vec<C64> = betas.iter().map(|&b| cinv(C64::from(1.0) - dt * b)).collect();

    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(Array1::from_vec(x0.to_vec()));
    let mut x = x0.to_vec();
    let mut nl = vec![C64::default(); n];
    for s in 0..steps {
        let t = t0 + s as f64 * dt;
        nonlinear(t, &x, &mut nl);
        for i in 0..n {
            x[i] = inv[i] * (x[i] + dt * nl[i]);
        }
        guard(&x, s + 1)?;
        samples.push(Array1::from_vec(x.clone()));
    }
    Ok(Trajectory::new(dt, t0, samples))
}

fn cinv(z: C64) -> C64 {
    C64::from(1.0) / z
}

/// Lift a reduced trajectory to the full eigen-coordinate space,
/// `x(t) ⊕ Φ(x(t))`.
pub fn lift_trajectory(param: &Parameterization, reduced: &Trajectory) -> Trajectory {
    assert_eq!(reduced.dim(), param.cutoff, "reduced trajectory dimension mismatch");
    let samples = (0..=reduced.steps())
        .map(|k| param.lift(reduced.state(k)))
        .collect();
    Trajectory::new(reduced.dt, reduced.t0, samples)
}

/// Reconstruct full physical-space solutions from a reduced trajectory:
/// lift through Φ, rotate out of eigen-coordinates, and optionally add back
/// a constant mean state (for models trained on fluctuations about it).
pub fn reconstruct(
    param: &Parameterization,
    basis: &SpectralBasis,
    reduced: &Trajectory,
    mean: Option<&Array1<C64>>,
) -> Result<Trajectory> {
    if basis.dim() != param.dim {
        return Err(Error::BasisMismatch(format!(
            "basis dimension {} vs parameterization dimension {}",
            basis.dim(),
            param.dim
        )));
    }
    assert_eq!(reduced.dim(), param.cutoff, "reduced trajectory dimension mismatch");
    if let Some(mv) = mean {
        assert_eq!(mv.len(), basis.dim(), "mean-state dimension mismatch");
    }
    let samples = (0..=reduced.steps())
        .map(|k| {
            let mut y = basis.from_eigen(&param.lift(reduced.state(k)));
            if let Some(mv) = mean {
                y += mv;
            }
            y
        })
        .collect();
    Ok(Trajectory::new(reduced.dt, reduced.t0, samples))
}
