//! Shared fixtures and independent numerical oracles for integration tests.
//!
//! Everything here is deliberately naive: plain loops, fixed-step rules,
//! direct formulas. The point is to provide routes to the same numbers that
//! share no code with the library internals being tested.
#![allow(dead_code)] // each test binary pulls in a subset

use ndarray::{Array1, Array2};
use pm_closure::defect::Trajectory;
use pm_closure::model::{BilinEntry, BilinearTensor, EigenModel, QuadraticModel};
use pm_closure::param::{Family, ModePoly, Parameterization, QuadCoeffs};
use pm_closure::{cr, C64};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c_rand(r: &mut ChaCha8Rng) -> C64 {
    C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))
}

pub fn random_xi(r: &mut ChaCha8Rng, m: usize) -> Vec<C64> {
    (0..m).map(|_| c_rand(r)).collect()
}

/// Random diagonalized quadratic system: resolved modes weakly stable or
/// unstable, unresolved modes strongly stable, dense-ish random interaction
/// rows over all mode pairs, optional forcing on every mode.
pub fn random_eigen_model(seed: u64, n: usize, m: usize, forced: bool) -> EigenModel {
    let mut r = rng(seed);
    let mut betas = Vec::with_capacity(n);
    for k in 0..n {
        if k < m {
            betas.push(C64::new(r.gen_range(-0.3..0.3), r.gen_range(-1.0..1.0)));
        } else {
            betas.push(C64::new(r.gen_range(-3.0..-1.0), r.gen_range(-1.0..1.0)));
        }
    }
    let mut rows = vec![Vec::new(); n];
    for row in rows.iter_mut() {
        for k in 0..n {
            for l in 0..n {
                if r.gen_range(0.0..1.0) < 0.7 {
                    row.push((k, l, cr(0.5) * c_rand(&mut r)));
                }
            }
        }
    }
    let forcing = if forced {
        Array1::from_iter((0..n).map(|_| cr(0.5) * c_rand(&mut r)))
    } else {
        Array1::zeros(n)
    };
    EigenModel {
        betas: Array1::from_vec(betas),
        rows,
        cubic_rows: vec![Vec::new(); n],
        forcing,
        cutoff: m,
        band: n,
        basis: None,
    }
}

/// Real 6×6 model with known spectrum `0.1 ± 1.3i, −0.5, −1.2 ± 0.7i, −2.0`:
/// a block-diagonal rotation form conjugated by a well-conditioned random
/// real similarity, plus random real quadratic terms and forcing.
pub fn real_block_model(seed: u64, forced: bool) -> QuadraticModel {
    let mut r = rng(seed);
    let n = 6;
    let mut lam = Array2::<f64>::zeros((n, n));
    // rotation block ↔ eigenvalues 0.1 ± 1.3i
    lam[(0, 0)] = 0.1;
    lam[(0, 1)] = 1.3;
    lam[(1, 0)] = -1.3;
    lam[(1, 1)] = 0.1;
    lam[(2, 2)] = -0.5;
    // rotation block ↔ eigenvalues −1.2 ± 0.7i
    lam[(3, 3)] = -1.2;
    lam[(3, 4)] = 0.7;
    lam[(4, 3)] = -0.7;
    lam[(4, 4)] = -1.2;
    lam[(5, 5)] = -2.0;

    // similarity S = I + 0.3 R, inverted by dense Gaussian elimination
    let mut s = Array2::<f64>::eye(n);
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] += 0.3 * r.gen_range(-1.0..1.0);
        }
    }
    let s_inv = invert_real(&s);
    let a_real = s.dot(&lam).dot(&s_inv);
    let linear = a_real.mapv(cr);

    let mut entries = Vec::new();
    for _ in 0..30 {
        entries.push(BilinEntry {
            out: r.gen_range(0..n),
            i: r.gen_range(0..n),
            j: r.gen_range(0..n),
            value: cr(r.gen_range(-0.5..0.5)),
        });
    }
    let forcing = if forced {
        Array1::from_iter((0..n).map(|_| cr(0.3 * r.gen_range(-1.0..1.0))))
    } else {
        Array1::zeros(n)
    };
    QuadraticModel {
        dim: n,
        linear,
        bilinear: BilinearTensor::new(n, entries),
        cubic: Vec::new(),
        forcing,
    }
}

/// Dense Gauss-Jordan inverse with partial pivoting (test-grade).
pub fn invert_real(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let mut work = a.clone();
    let mut inv = Array2::<f64>::eye(n);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&p, &q| work[(p, col)].abs().partial_cmp(&work[(q, col)].abs()).unwrap())
            .unwrap();
        if piv != col {
            for j in 0..n {
                work.swap((col, j), (piv, j));
                inv.swap((col, j), (piv, j));
            }
        }
        let d = work[(col, col)];
        assert!(d.abs() > 1e-12, "singular test matrix");
        for j in 0..n {
            work[(col, j)] /= d;
            inv[(col, j)] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = work[(i, col)];
                if f != 0.0 {
                    for j in 0..n {
                        work[(i, j)] -= f * work[(col, j)];
                        inv[(i, j)] -= f * inv[(col, j)];
                    }
                }
            }
        }
    }
    inv
}

/// Fixed-step classical RK4 on `dx/dt = f(t, x)`, returning the states at
/// every step boundary including the initial one (`steps + 1` entries).
pub fn rk4_path<F>(f: F, x0: &Array1<C64>, t0: f64, dt: f64, steps: usize) -> Vec<Array1<C64>>
where
    F: Fn(f64, &Array1<C64>) -> Array1<C64>,
{
    let mut out = Vec::with_capacity(steps + 1);
    let mut x = x0.clone();
    let mut t = t0;
    out.push(x.clone());
    for _ in 0..steps {
        let k1 = f(t, &x);
        let k2 = f(t + 0.5 * dt, &(&x + &(&k1 * cr(0.5 * dt))));
        let k3 = f(t + 0.5 * dt, &(&x + &(&k2 * cr(0.5 * dt))));
        let k4 = f(t + dt, &(&x + &(&k3 * cr(dt))));
        x = &x + &((k1 + k2 * cr(2.0) + k3 * cr(2.0) + k4) * cr(dt / 6.0));
        t += dt;
        out.push(x.clone());
    }
    out
}

/// Central finite difference of a scalar complex function of `ξ ∈ C^m` along
/// a complex direction `v`. Exact (to roundoff) for polynomials of degree ≤ 2.
pub fn fd_directional<F>(f: F, xi: &[C64], v: &[C64], eps: f64) -> C64
where
    F: Fn(&[C64]) -> C64,
{
    let plus: Vec<C64> = xi.iter().zip(v).map(|(x, d)| x + cr(eps) * d).collect();
    let minus: Vec<C64> = xi.iter().zip(v).map(|(x, d)| x - cr(eps) * d).collect();
    (f(&plus) - f(&minus)) / cr(2.0 * eps)
}

/// Pullback-limit quadrature for the leading-order invariant manifold of a
/// diagonal model: `∫_{−∞}^0 e^{−s β_n} Q_n(e^{s β_c} ∘ ξ) ds` evaluated by
/// composite Simpson on `[−s_len, 0]`, where `Q_n` is the resolved×resolved
/// quadratic interaction of mode `n` read off the model rows.
pub fn pullback_quadrature(em: &EigenModel, n: usize, xi: &[C64], s_len: f64, steps: usize) -> C64 {
    assert!(steps % 2 == 0, "Simpson needs an even step count");
    let m = em.cutoff;
    let integrand = |s: f64| -> C64 {
        let flowed: Vec<C64> = (0..m).map(|k| (em.betas[k] * s).exp() * xi[k]).collect();
        let mut q = C64::default();
        for &(k, l, b) in &em.rows[n] {
            if k < m && l < m {
                q += b * flowed[k] * flowed[l];
            }
        }
        (-em.betas[n] * s).exp() * q
    };
    let h = s_len / steps as f64;
    let mut acc = integrand(-s_len) + integrand(0.0);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += cr(w) * integrand(-s_len + i as f64 * h);
    }
    acc * cr(h / 3.0)
}

/// Largest entry-wise modulus difference between two complex slices.
pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Trajectory from raw complex sample rows at uniform spacing, starting at t = 0.
pub fn traj_from(dt: f64, states: Vec<Vec<C64>>) -> Trajectory {
    Trajectory::new(dt, 0.0, states.into_iter().map(Array1::from_vec).collect())
}

/// Hand-assembled parameterization from explicit per-mode polynomials.
pub fn hand_param(dim: usize, m: usize, modes: Vec<ModePoly>) -> Parameterization {
    assert_eq!(modes.len(), dim - m);
    Parameterization {
        family: Family::Zero,
        dim,
        cutoff: m,
        taus: vec![0.0; dim - m],
        modes,
    }
}

/// Affine per-mode polynomial `constant + linear·ξ`.
pub fn poly(m: usize, constant: C64, linear: Vec<C64>) -> ModePoly {
    assert_eq!(linear.len(), m);
    ModePoly {
        constant,
        linear,
        quad: QuadCoeffs::from_triplets(m, Vec::new()),
        cubic: Vec::new(),
    }
}

/// Short bounded path of a random dissipative model in eigen-coordinates,
/// wrapped as a training trajectory.
pub fn model_path(
    seed: u64,
    n: usize,
    m: usize,
    forced: bool,
    steps: usize,
    dt: f64,
) -> (EigenModel, Trajectory) {
    let em = random_eigen_model(seed, n, m, forced);
    let mut r = rng(seed ^ 0xD1CE);
    let x0 = Array1::from_vec(random_xi(&mut r, n)) * cr(0.1);
    let path = rk4_path(|_, x| em.rhs(x), &x0, 0.0, dt, steps);
    assert!(
        path.iter().all(|s| s.iter().all(|z| z.norm().is_finite())),
        "training path stayed bounded"
    );
    (em, Trajectory::new(dt, 0.0, path))
}
