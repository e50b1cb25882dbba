//! Quadratic models and their spectral form.
//!
//! A [`QuadraticModel`] is `dy/dt = A y + B(y,y) + F` with a sparse bilinear
//! tensor. [`decompose`] produces a [`SpectralBasis`]: eigenvalues in
//! lexicographic order (real part non-increasing, ties by imaginary part
//! non-increasing), unit-norm right eigenvectors, and dual vectors scaled so
//! `<e_i, e_j*> = δ_ij` under the inner product `<a,b> = Σ a_i conj(b_i)`.
//! [`to_eigen_model`] then rewrites the system in eigen-coordinates, where the
//! linear part is diagonal and all couplings live in the interaction
//! coefficients `B̃ⁿ_{kℓ} = <B(e_k, e_ℓ), e_n*>`.
//!
//! Everything is carried in complex double precision, including real models;
//! for a real `A` the decomposition is made exactly conjugate-symmetric
//! (paired eigenvectors are stored as literal conjugates of each other), so
//! conjugate-mode outputs of downstream formulas agree to roundoff rather
//! than to solver tolerance.

use crate::error::{Error, Result};
use crate::C64;
use faer::complex_native::c64;
use faer::prelude::*;
use ndarray::{Array1, Array2};

/// Default bound on the eigenvector-matrix condition number above which the
/// linear part is declared non-diagonalizable.
pub const DEFAULT_COND_BOUND: f64 = 1e8;

/// Relative tolerance used for eigenvalue tie detection and conjugate-pair
/// matching. Scaled by the spectral magnitude.
const TIE_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// sparse tensors
// ---------------------------------------------------------------------------

/// One bilinear entry: `out`-th component of `B(u,v)` accumulates
/// `value * u[i] * v[j]`. All indices 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilinEntry {
    pub out: usize,
    pub i: usize,
    pub j: usize,
    pub value: C64,
}

/// Sparse bilinear tensor of a quadratic model.
#[derive(Debug, Clone, Default)]
pub struct BilinearTensor {
    pub dim: usize,
    pub entries: Vec<BilinEntry>,
}

impl BilinearTensor {
    pub fn new(dim: usize, entries: Vec<BilinEntry>) -> Self {
        for e in &entries {
            assert!(
                e.out < dim && e.i < dim && e.j < dim,
                "bilinear entry index out of range"
            );
        }
        Self { dim, entries }
    }

    /// `B(u, v)` — note the tensor is *not* assumed symmetric in (u, v).
    pub fn apply(&self, u: &Array1<C64>, v: &Array1<C64>) -> Array1<C64> {
        let mut out = Array1::zeros(self.dim);
        self.apply_add(u, v, &mut out);
        out
    }

    /// Accumulating form of [`BilinearTensor::apply`].
    pub fn apply_add(&self, u: &Array1<C64>, v: &Array1<C64>, out: &mut Array1<C64>) {
        for e in &self.entries {
            out[e.out] += e.value * u[e.i] * v[e.j];
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One cubic entry: `out`-th component of `G₃(u,v,w)` accumulates
/// `value * u[i] * v[j] * w[k]`. Only used by the order-3 invariant-manifold
/// parameterization for user models that carry cubic terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicEntry {
    pub out: usize,
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub value: C64,
}

// ---------------------------------------------------------------------------
// physical-space model
// ---------------------------------------------------------------------------

/// Quadratic ODE system `dy/dt = A y + B(y,y) + G₃(y,y,y) + F` in its natural
/// (physical) coordinates. The cubic tensor is empty for the builtin models.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    pub dim: usize,
    pub linear: Array2<C64>,
    pub bilinear: BilinearTensor,
    pub cubic: Vec<CubicEntry>,
    pub forcing: Array1<C64>,
}

impl QuadraticModel {
    pub fn new(linear: Array2<C64>, bilinear: BilinearTensor, forcing: Array1<C64>) -> Self {
        let dim = forcing.len();
        assert_eq!(linear.nrows(), dim);
        assert_eq!(linear.ncols(), dim);
        assert_eq!(bilinear.dim, dim);
        Self {
            dim,
            linear,
            bilinear,
            cubic: Vec::new(),
            forcing,
        }
    }

    /// Full right-hand side `A y + B(y,y) + G₃(y,y,y) + F`.
    pub fn rhs(&self, y: &Array1<C64>) -> Array1<C64> {
        let mut out = self.linear.dot(y) + &self.forcing;
        self.bilinear.apply_add(y, y, &mut out);
        for e in &self.cubic {
            out[e.out] += e.value * y[e.i] * y[e.j] * y[e.k];
        }
        out
    }
}

/// Rewrite the model in the fluctuation variable `D = y − mean`.
///
/// The bilinear tensor is unchanged; the linear part absorbs the cross terms
/// `B(mean, ·) + B(·, mean)`, and the forcing absorbs the mean's own
/// tendency `A·mean + B(mean,mean) + F`. If `mean` is a fixed point the
/// returned forcing is zero. (Only defined for models without cubic terms.)
pub fn fluctuation_model(model: &QuadraticModel, mean: &Array1<C64>) -> QuadraticModel {
    assert!(
        model.cubic.is_empty(),
        "fluctuation transform only implemented for quadratic models"
    );
    let n = model.dim;
    let mut linear = model.linear.clone();
    for e in &model.bilinear.entries {
        // B(mean, D): contributes value*mean_i to column j of the new linear part
        linear[(e.out, e.j)] += e.value * mean[e.i];
        // B(D, mean): contributes value*mean_j to column i
        linear[(e.out, e.i)] += e.value * mean[e.j];
    }
    let mut forcing = model.linear.dot(mean) + &model.forcing;
    model.bilinear.apply_add(mean, mean, &mut forcing);
    QuadraticModel {
        dim: n,
        linear,
        bilinear: model.bilinear.clone(),
        cubic: Vec::new(),
        forcing,
    }
}

// ---------------------------------------------------------------------------
// spectral basis
// ---------------------------------------------------------------------------

/// Eigen-structure of the linear part with a resolved/unresolved cutoff.
///
/// Columns of `right` are the eigenvectors `e_j` (unit 2-norm); columns of
/// `dual` are the eigenvectors `e_j*` of the conjugate-transpose problem,
/// scaled for biorthogonality. `eigenvalues` is lexicographically ordered.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    pub eigenvalues: Array1<C64>,
    pub right: Array2<C64>,
    pub dual: Array2<C64>,
    pub cutoff: usize,
}

/// Inner product `<a, b> = Σ a_i conj(b_i)`.
pub fn inner(a: &Array1<C64>, b: &Array1<C64>) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
}

impl SpectralBasis {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Projection of `x` on mode `n` (0-based): `<x, e_n*>`.
    pub fn project(&self, x: &Array1<C64>, n: usize) -> C64 {
        let mut acc = C64::default();
        for i in 0..self.dim() {
            acc += x[i] * self.dual[(i, n)].conj();
        }
        acc
    }

    /// All eigen-coordinates of `x` at once: `ξ_j = <x, e_j*>`.
    pub fn to_eigen(&self, x: &Array1<C64>) -> Array1<C64> {
        Array1::from_iter((0..self.dim()).map(|n| self.project(x, n)))
    }

    /// Physical state from eigen-coordinates: `x = Σ ξ_j e_j`.
    pub fn from_eigen(&self, xi: &Array1<C64>) -> Array1<C64> {
        self.right.dot(xi)
    }

    /// Index of the conjugate partner of mode `n`, if the spectrum carries
    /// one (`β_p ≈ conj β_n` with nonzero imaginary part).
    pub fn conjugate_partner(&self, n: usize) -> Option<usize> {
        let beta = self.eigenvalues[n];
        if beta.im == 0.0 {
            return None;
        }
        let scale = spectral_scale(&self.eigenvalues);
        (0..self.dim())
            .find(|&p| p != n && (self.eigenvalues[p] - beta.conj()).norm() <= TIE_TOL * scale)
    }

    /// Maximum biorthogonality error `max |<e_i, e_j*> − δ_ij|`.
    pub fn biorthogonality_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                let mut acc = C64::default();
                for r in 0..n {
                    acc += self.right[(r, i)] * self.dual[(r, j)].conj();
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((acc - target).norm());
            }
        }
        worst
    }
}

fn spectral_scale(betas: &Array1<C64>) -> f64 {
    betas.iter().map(|b| b.norm()).fold(1.0f64, f64::max)
}

// ---------------------------------------------------------------------------
// decomposition
// ---------------------------------------------------------------------------

fn to_faer(a: &Array2<C64>) -> faer::Mat<c64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| {
        c64::new(a[(i, j)].re, a[(i, j)].im)
    })
}

/// Spectral decomposition of the model's linear part with the default
/// diagonalizability bound.
pub fn decompose(model: &QuadraticModel, cutoff: usize) -> Result<SpectralBasis> {
    decompose_with(model, cutoff, DEFAULT_COND_BOUND)
}

/// Spectral decomposition with an explicit eigenvector condition bound.
///
/// Steps: general complex eigensolve; condition check of the eigenvector
/// matrix (reject as non-diagonalizable above `cond_bound`); lexicographic
/// ordering; deterministic phase fixing; exact conjugate symmetrization for
/// real matrices; dual vectors from the inverse of the eigenvector matrix;
/// cutoff admissibility check.
pub fn decompose_with(
    model: &QuadraticModel,
    cutoff: usize,
    cond_bound: f64,
) -> Result<SpectralBasis> {
    let n = model.dim;
    assert!(cutoff >= 1 && cutoff < n, "cutoff must satisfy 1 <= m < N");

    let a = to_faer(&model.linear);
    let evd = a.complex_eigendecomposition();
    let raw_vals = evd.s().column_vector();
    let raw_vecs = evd.u();

    // condition number of the eigenvector matrix
    let svd = evd.u().svd();
    let sv = svd.s_diagonal();
    let (smax, smin) = (sv.read(0).re, sv.read(sv.nrows() - 1).re);
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond <= cond_bound) {
        return Err(Error::NonDiagonalizable {
            cond,
            bound: cond_bound,
        });
    }

    let mut betas: Vec<C64> = (0..n)
        .map(|k| {
            let v = raw_vals.read(k);
            C64::new(v.re, v.im)
        })
        .collect();
    let mut vecs: Vec<Array1<C64>> = (0..n)
        .map(|k| Array1::from_iter((0..n).map(|i| C64::new(raw_vecs.read(i, k).re, raw_vecs.read(i, k).im))))
        .collect();

    // lexicographic order: Re desc, then (within Re ties) Im desc
    let scale = spectral_scale(&Array1::from_vec(betas.clone()));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| betas[b].re.partial_cmp(&betas[a].re).unwrap());
    let tol = TIE_TOL * scale;
    let mut s = 0;
    while s < n {
        let mut e = s + 1;
        while e < n && (betas[order[e - 1]].re - betas[order[e]].re).abs() <= tol {
            e += 1;
        }
        order[s..e].sort_by(|&a, &b| betas[b].im.partial_cmp(&betas[a].im).unwrap());
        s = e;
    }
    let perm = order;
    betas = perm.iter().map(|&k| betas[k]).collect();
    let mut sorted_vecs: Vec<Array1<C64>> = perm.iter().map(|&k| vecs[k].clone()).collect();
    vecs.clear();

    // unit norm + deterministic phase: rotate so the largest-|.| component is
    // real positive
    for v in sorted_vecs.iter_mut() {
        let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.mapv_inplace(|z| z / nrm);
        let lead = v
            .iter()
            .cloned()
            .max_by(|a, b| a.norm_sqr().partial_cmp(&b.norm_sqr()).unwrap())
            .unwrap();
        if lead.norm() > 0.0 {
            let phase = lead / lead.norm();
            v.mapv_inplace(|z| z / phase);
        }
    }

    // exact conjugate symmetry for real matrices
    let a_imag_max = model.linear.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let a_scale = model.linear.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if a_imag_max <= 1e-14 * a_scale {
        let mut claimed = vec![false; n];
        for j in 0..n {
            if claimed[j] {
                continue;
            }
            if betas[j].im.abs() <= tol {
                // real eigenvalue of a real matrix: strip the residual
                // imaginary parts outright
                betas[j] = C64::new(betas[j].re, 0.0);
                sorted_vecs[j].mapv_inplace(|z| C64::new(z.re, 0.0));
                let nrm = sorted_vecs[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                sorted_vecs[j].mapv_inplace(|z| z / nrm);
                claimed[j] = true;
            } else {
                let partner = (j + 1..n)
                    .find(|&p| !claimed[p] && (betas[p] - betas[j].conj()).norm() <= tol)
                    .expect("real matrix must carry conjugate eigenvalue pairs");
                betas[partner] = betas[j].conj();
                sorted_vecs[partner] = sorted_vecs[j].mapv(|z| z.conj());
                claimed[j] = true;
                claimed[partner] = true;
            }
        }
    }

    let mut right = Array2::zeros((n, n));
    for (j, v) in sorted_vecs.iter().enumerate() {
        for i in 0..n {
            right[(i, j)] = v[i];
        }
    }

    // duals: columns of (E^H)^{-1}, i.e. solve E^H X = I
    let e_h = faer::Mat::from_fn(n, n, |i, j| {
        let z = right[(j, i)];
        c64::new(z.re, -z.im)
    });
    let lu = e_h.partial_piv_lu();
    let x = lu.solve(faer::Mat::<c64>::identity(n, n));
    let mut dual = Array2::zeros((n, n));
    for j in 0..n {
        for i in 0..n {
            dual[(i, j)] = C64::new(x.read(i, j).re, x.read(i, j).im);
        }
    }

    let betas = Array1::from_vec(betas);

    // cutoff admissibility: reject when modes m and m+1 share the real part
    // AND are conjugates (or exact duplicates) of each other
    let (bm, bm1) = (betas[cutoff - 1], betas[cutoff]);
    if (bm.re - bm1.re).abs() <= tol && (bm1 - bm.conj()).norm() <= tol {
        return Err(Error::CutoffSplitsPair {
            m: cutoff,
            re: bm.re,
        });
    }

    let basis = SpectralBasis {
        eigenvalues: betas,
        right,
        dual,
        cutoff,
    };
    debug_assert!(basis.biorthogonality_error() < 1e-10);
    Ok(basis)
}

// ---------------------------------------------------------------------------
// eigen-coordinate model
// ---------------------------------------------------------------------------

/// The model rewritten in eigen-coordinates: diagonal linear part `β`,
/// interaction rows `B̃ⁿ_{kℓ}`, forcing `F̃_n = <F, e_n*>`.
///
/// `rows[n]` lists the nonzero `(k, ℓ, B̃ⁿ_{kℓ})` of output mode `n`; rows may
/// be materialized only up to a band limit for analytically-built models (the
/// Kuramoto–Sivashinsky builder restricts to the modes a closure can touch).
/// `basis` is `None` for such analytic models, whose coordinates are already
/// the physical unknowns.
#[derive(Debug, Clone)]
pub struct EigenModel {
    pub betas: Array1<C64>,
    pub rows: Vec<Vec<(usize, usize, C64)>>,
    /// Cubic interaction rows `G̃₃ⁿ_{ijk}`; empty for quadratic models.
    pub cubic_rows: Vec<Vec<(usize, usize, usize, C64)>>,
    pub forcing: Array1<C64>,
    pub cutoff: usize,
    /// Highest (0-based, exclusive) output mode with materialized
    /// interaction/forcing data. Equals `dim()` for fully transformed models.
    pub band: usize,
    pub basis: Option<SpectralBasis>,
}

impl EigenModel {
    pub fn dim(&self) -> usize {
        self.betas.len()
    }

    /// Interaction coefficient `B̃ⁿ_{kℓ}` (0-based indices; linear scan of the
    /// sparse row — fine for assembly work, not meant for inner loops).
    pub fn coeff(&self, n: usize, k: usize, l: usize) -> C64 {
        self.rows[n]
            .iter()
            .filter(|&&(a, b, _)| a == k && b == l)
            .map(|&(_, _, v)| v)
            .sum()
    }

    /// Full right-hand side in eigen-coordinates (modes beyond `band` evolve
    /// linearly — their interaction rows are not materialized).
    pub fn rhs(&self, x: &Array1<C64>) -> Array1<C64> {
        let mut out = Array1::zeros(self.dim());
        for n in 0..self.dim() {
            let mut acc = self.betas[n] * x[n] + self.forcing[n];
            if n < self.band {
                for &(k, l, v) in &self.rows[n] {
                    acc += v * x[k] * x[l];
                }
                for &(i, j, k, v) in self.cubic_rows.get(n).map(Vec::as_slice).unwrap_or(&[]) {
                    acc += v * x[i] * x[j] * x[k];
                }
            }
            out[n] = acc;
        }
        out
    }
}

/// Transform a model into eigen-coordinates over the given basis.
///
/// Fails with `BasisMismatch` when the basis does not diagonalize the
/// model's linear part (residual `‖A e_j − β_j e_j‖` above tolerance).
pub fn to_eigen_model(model: &QuadraticModel, basis: &SpectralBasis) -> Result<EigenModel> {
    let n = model.dim;
    if basis.dim() != n {
        return Err(Error::BasisMismatch(format!(
            "basis dimension {} vs model dimension {}",
            basis.dim(),
            n
        )));
    }
    let a_scale = model.linear.iter().map(|z| z.norm()).fold(1.0, f64::max);
    for j in 0..n {
        let ej = basis.right.column(j).to_owned();
        let res = model.linear.dot(&ej) - basis.eigenvalues[j] * &ej;
        let rnorm = res.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if rnorm > 1e-8 * a_scale {
            return Err(Error::BasisMismatch(format!(
                "eigen residual {rnorm:.3e} at mode {j}"
            )));
        }
    }

    let cols: Vec<Array1<C64>> = (0..n).map(|j| basis.right.column(j).to_owned()).collect();
    let mut rows: Vec<Vec<(usize, usize, C64)>> = vec![Vec::new(); n];
    for k in 0..n {
        for l in 0..n {
            let w = model.bilinear.apply(&cols[k], &cols[l]);
            for out in 0..n {
                let v = basis.project(&w, out);
                if v.norm() > 0.0 {
                    rows[out].push((k, l, v));
                }
            }
        }
    }

    let mut cubic_rows: Vec<Vec<(usize, usize, usize, C64)>> = vec![Vec::new(); n];
    if !model.cubic.is_empty() {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut w = Array1::<C64>::zeros(n);
                    for e in &model.cubic {
                        w[e.out] += e.value * cols[i][e.i] * cols[j][e.j] * cols[k][e.k];
                    }
                    for out in 0..n {
                        let v = basis.project(&w, out);
                        if v.norm() > 0.0 {
                            cubic_rows[out].push((i, j, k, v));
                        }
                    }
                }
            }
        }
    }

    let forcing = Array1::from_iter((0..n).map(|out| basis.project(&model.forcing, out)));

    Ok(EigenModel {
        betas: basis.eigenvalues.clone(),
        rows,
        cubic_rows,
        forcing,
        cutoff: basis.cutoff,
        band: n,
        basis: Some(basis.clone()),
    })
}
