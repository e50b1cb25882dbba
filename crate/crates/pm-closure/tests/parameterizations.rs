//! Parameterization family contracts: closed forms against independent
//! oracles, branch handling at pinned-zero eigenvalues, invariance residuals,
//! and limit behavior.

mod common;

use std::collections::BTreeMap;

use common::{fd_directional, pullback_quadrature, random_eigen_model, random_xi, rng};
use ndarray::Array1;
use pm_closure::model::EigenModel;
use pm_closure::param::{
    bf_oracle, im_build, ktau_build, lia_build, lia_coeff_d, qsa_build, tau_coeffs, zero_build,
    Family, QuadCoeffs,
};
use pm_closure::{cr, C64, Error};

fn taus_all(em: &EigenModel, tau: f64) -> BTreeMap<usize, f64> {
    (em.cutoff..em.dim()).map(|n| (n, tau)).collect()
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / (1.0 + b.norm())
}

/// Hand-built diagonal model: betas and one interaction row for the single
/// unresolved mode, everything else empty.
fn tiny_model(
    betas: Vec<C64>,
    m: usize,
    row: Vec<(usize, usize, C64)>,
    forcing: Vec<C64>,
) -> EigenModel {
    let n = betas.len();
    let mut rows = vec![Vec::new(); n];
    rows[n - 1] = row;
    EigenModel {
        betas: Array1::from_vec(betas),
        rows,
        cubic_rows: vec![Vec::new(); n],
        forcing: Array1::from_vec(forcing),
        cutoff: m,
        band: n,
        basis: None,
    }
}

// ---------------------------------------------------------------------------
// quadratic-window coefficient
// ---------------------------------------------------------------------------

#[test]
fn window_coefficient_branches() {
    // exact resonance: coefficient equals the window itself
    let betas = Array1::from_vec(vec![cr(0.2), cr(0.3), cr(0.5)]);
    assert_eq!(lia_coeff_d(0, 1, 2, 0.8, &betas), cr(0.8));

    // zero window: coefficient vanishes for any gap
    let betas = Array1::from_vec(vec![cr(0.9), cr(-0.4), cr(-2.0)]);
    assert_eq!(lia_coeff_d(0, 1, 2, 0.0, &betas), cr(0.0));

    // positive-gap long-window limit: 1/gap, the invariant-manifold value
    let gap = betas[0] + betas[1] - betas[2];
    let d = lia_coeff_d(0, 1, 2, 30.0, &betas);
    assert!((d - cr(1.0) / gap).norm() < 1e-12);
}

#[test]
fn window_coefficient_is_continuous_across_the_resonance() {
    for tau in [0.5, 10.0] {
        for k in 4..=12 {
            let delta = 10f64.powi(-k);
            for gap in [cr(delta), C64::new(0.0, delta), C64::new(delta, -delta)] {
                let betas = Array1::from_vec(vec![gap, cr(0.0), cr(0.0)]);
                let d = lia_coeff_d(0, 1, 2, tau, &betas);
                let drift = (d - cr(tau)).norm();
                assert!(
                    drift <= gap.norm() * tau * tau,
                    "gap {gap}, tau {tau}: drift {drift:.3e}"
                );
            }
        }
    }
}

// ---------------------------------------------------------------------------
// degenerate windows and families
// ---------------------------------------------------------------------------

#[test]
fn zero_window_collapses_every_tau_family_to_flat() {
    let em = random_eigen_model(42, 5, 2, true);
    let taus = taus_all(&em, 0.0);
    let mut r = rng(3);
    let xi = random_xi(&mut r, 2);

    for p in [
        lia_build(&em, &taus),
        qsa_build(&em, &taus),
        ktau_build(&em, &taus).unwrap(),
    ] {
        for v in p.eval(&xi) {
            assert_eq!(v, C64::default());
        }
        for mode in &p.modes {
            assert_eq!(mode.constant, C64::default());
            assert!(mode.linear.iter().all(|c| *c == C64::default()));
            assert_eq!(mode.quad.nnz(), 0);
        }
    }
}

#[test]
fn flat_family_is_identically_zero() {
    let em = random_eigen_model(43, 5, 2, true);
    let p = zero_build(&em);
    assert_eq!(p.family, Family::Zero);
    let mut r = rng(4);
    let xi = random_xi(&mut r, 2);
    assert!(p.eval(&xi).iter().all(|v| *v == C64::default()));
}

#[test]
fn unforced_backward_forward_family_is_purely_quadratic() {
    let em = random_eigen_model(44, 6, 3, false);
    let p = lia_build(&em, &taus_all(&em, 0.7));
    for mode in &p.modes {
        assert_eq!(mode.constant, C64::default());
        assert!(mode.linear.iter().all(|c| *c == C64::default()));
        assert!(mode.quad.nnz() > 0);
    }
}

// ---------------------------------------------------------------------------
// backward-forward oracle agreement
// ---------------------------------------------------------------------------

#[test]
fn backward_forward_oracle_trivial_cases() {
    let em = random_eigen_model(45, 4, 2, true);
    let mut r = rng(5);
    let xi = random_xi(&mut r, 2);
    assert_eq!(bf_oracle(&em, 2, 0.0, &xi, 200), C64::default());

    // no source at all: zero regardless of the window
    let quiet = tiny_model(
        vec![cr(0.1), cr(-0.2), cr(-1.5)],
        2,
        Vec::new(),
        vec![C64::default(); 3],
    );
    assert_eq!(bf_oracle(&quiet, 2, 1.7, &xi, 200), C64::default());
}

#[test]
fn closed_form_matches_oracle_on_random_models() {
    // unforced 4-mode model, single window
    let em = random_eigen_model(46, 4, 2, false);
    let p = lia_build(&em, &taus_all(&em, 0.7));
    let mut r = rng(6);
    for _ in 0..20 {
        let xi = random_xi(&mut r, 2);
        for n in 2..4 {
            let direct = p.eval_mode(n, &xi);
            let oracle = bf_oracle(&em, n, 0.7, &xi, 2000);
            assert!(rel(direct, oracle) < 1e-6, "mode {n}: {direct} vs {oracle}");
        }
    }

    // forced 6-mode model, varied per-mode windows
    let em = random_eigen_model(47, 6, 3, true);
    let taus: BTreeMap<usize, f64> = (3..6).map(|n| (n, 0.3 + 0.2 * (n - 3) as f64)).collect();
    let p = lia_build(&em, &taus);
    for _ in 0..10 {
        let xi = random_xi(&mut r, 3);
        for n in 3..6 {
            let direct = p.eval_mode(n, &xi);
            let oracle = bf_oracle(&em, n, taus[&n], &xi, 2000);
            assert!(rel(direct, oracle) < 1e-6, "mode {n}: {direct} vs {oracle}");
        }
    }
}

#[test]
fn forcing_branches_match_oracle_with_pinned_zero_eigenvalues() {
    // β_0 = 0 exactly: every interaction pair hits a different branch of the
    // forcing coefficients ((0,0) doubly singular, (0,1)/(1,0) half singular,
    // (1,1) regular)
    let em = tiny_model(
        vec![cr(0.0), cr(0.3), C64::new(-1.1, 0.4)],
        2,
        vec![
            (0, 0, C64::new(0.7, -0.2)),
            (0, 1, C64::new(-0.4, 0.9)),
            (1, 0, C64::new(0.2, 0.5)),
            (1, 1, C64::new(-0.8, -0.3)),
        ],
        vec![C64::new(0.6, 0.1), C64::new(-0.5, 0.7), C64::new(0.4, -0.9)],
    );
    let tau = 0.9;
    let p = lia_build(&em, &taus_all(&em, tau));
    let mut r = rng(7);
    for _ in 0..10 {
        let xi = random_xi(&mut r, 2);
        let direct = p.eval_mode(2, &xi);
        let oracle = bf_oracle(&em, 2, tau, &xi, 4000);
        assert!(rel(direct, oracle) < 1e-6, "{direct} vs {oracle}");
    }

    // β_n = 0 exactly: the parameterized mode itself is neutral
    let em = tiny_model(
        vec![cr(0.2), C64::new(-0.4, 0.6), cr(0.0)],
        2,
        vec![(0, 1, C64::new(0.9, 0.1)), (1, 1, C64::new(-0.6, 0.4))],
        vec![C64::new(0.3, -0.2), C64::new(0.8, 0.5), C64::new(-0.7, 0.2)],
    );
    let p = lia_build(&em, &taus_all(&em, tau));
    for _ in 0..10 {
        let xi = random_xi(&mut r, 2);
        let direct = p.eval_mode(2, &xi);
        let oracle = bf_oracle(&em, 2, tau, &xi, 4000);
        assert!(rel(direct, oracle) < 1e-6, "{direct} vs {oracle}");
    }
}

#[test]
fn resonant_interaction_gap_matches_oracle() {
    // β_0 + β_1 − β_2 = 0 exactly: the (0,1)/(1,0) quadratic coefficients sit
    // on the resonance branch
    let em = tiny_model(
        vec![cr(0.2), cr(0.3), cr(0.5)],
        2,
        vec![
            (0, 1, C64::new(0.8, -0.1)),
            (1, 0, C64::new(-0.2, 0.6)),
            (0, 0, C64::new(0.5, 0.2)),
        ],
        vec![C64::default(), C64::default(), C64::default()],
    );
    let p = lia_build(&em, &taus_all(&em, 1.2));
    let mut r = rng(8);
    for _ in 0..10 {
        let xi = random_xi(&mut r, 2);
        let direct = p.eval_mode(2, &xi);
        let oracle = bf_oracle(&em, 2, 1.2, &xi, 2000);
        assert!(rel(direct, oracle) < 1e-6, "{direct} vs {oracle}");
    }
}

#[test]
fn backward_forward_oracle_converges_at_fourth_order() {
    let em = random_eigen_model(48, 4, 2, true);
    let p = lia_build(&em, &taus_all(&em, 1.3));
    let mut r = rng(9);
    let xi = random_xi(&mut r, 2);
    let exact = p.eval_mode(2, &xi);

    let err = |steps: usize| (bf_oracle(&em, 2, 1.3, &xi, steps) - exact).norm();
    let (e100, e200) = (err(100), err(200));
    assert!(e200 > 1e-13, "error already at roundoff, ratio meaningless");
    let ratio = e100 / e200;
    assert!(
        (10.0..24.0).contains(&ratio),
        "step-doubling ratio {ratio:.2} (errors {e100:.3e}, {e200:.3e})"
    );
}

// ---------------------------------------------------------------------------
// quasi-stationary and resolvent families
// ---------------------------------------------------------------------------

#[test]
fn quasi_stationary_coefficient_shapes() {
    // β_n = 0: coefficient is the window itself
    let b = C64::new(0.37, -0.23);
    let em = tiny_model(
        vec![cr(0.1), cr(0.0)],
        1,
        vec![(0, 0, b)],
        vec![C64::default(), C64::default()],
    );
    let p = qsa_build(&em, &taus_all(&em, 0.8));
    assert!((p.modes[0].quad.get(0, 0, 1) - cr(0.8) * b).norm() < 1e-14);

    // stable real β_n, long window: −1/β_n, the stationary limit
    let em = tiny_model(
        vec![cr(0.1), cr(-2.5)],
        1,
        vec![(0, 0, b)],
        vec![C64::default(), cr(0.4)],
    );
    let p = qsa_build(&em, &taus_all(&em, 40.0));
    let coeff = p.modes[0].quad.get(0, 0, 1);
    assert!((coeff - b * cr(1.0 / 2.5)).norm() < 1e-12);
    // the constant term gets the same stationary factor against the forcing
    assert!((p.modes[0].constant - cr(0.4 / 2.5)).norm() < 1e-12);
}

#[test]
fn resolvent_family_arithmetic_and_singularity() {
    let b = C64::new(-0.9, 0.4);
    let em = tiny_model(
        vec![cr(0.1), cr(-2.0)],
        1,
        vec![(0, 0, b)],
        vec![C64::default(), C64::default()],
    );
    // τ/(1 − βτ) at β = −2, τ = 1 is 1/3
    let p = ktau_build(&em, &taus_all(&em, 1.0)).unwrap();
    assert!((p.modes[0].quad.get(0, 0, 1) - b * cr(1.0 / 3.0)).norm() < 1e-14);

    // long window tends to the stationary coefficient −1/β
    let p = ktau_build(&em, &taus_all(&em, 4000.0)).unwrap();
    assert!((p.modes[0].quad.get(0, 0, 1) - b * cr(0.5)).norm() < 1e-3);

    // unstable real β hits the resolvent pole at τ = 1/β
    let em = tiny_model(
        vec![cr(0.1), cr(2.0)],
        1,
        vec![(0, 0, b)],
        vec![C64::default(), C64::default()],
    );
    match ktau_build(&em, &taus_all(&em, 0.5)) {
        Err(Error::SingularResolvent { mode, tau }) => {
            assert_eq!(mode, 1);
            assert_eq!(tau, 0.5);
        }
        other => panic!("expected SingularResolvent, got {other:?}"),
    }
}

// ---------------------------------------------------------------------------
// invariant-manifold family
// ---------------------------------------------------------------------------

#[test]
fn invariant_manifold_worked_example() {
    // β = (1, −3), single resolved mode, unit interaction: coefficient 1/5
    let em = tiny_model(
        vec![cr(1.0), cr(-3.0)],
        1,
        vec![(0, 0, cr(1.0))],
        vec![C64::default(), C64::default()],
    );
    let p = im_build(&em, 2).unwrap();
    assert!((p.modes[0].quad.get(0, 0, 1) - cr(0.2)).norm() < 1e-15);
    let v = p.eval(&[cr(2.0)]);
    assert!((v[0] - cr(0.8)).norm() < 1e-14);
}

#[test]
fn empty_interaction_row_gives_flat_manifold() {
    let em = tiny_model(
        vec![cr(0.1), cr(-1.0)],
        1,
        Vec::new(),
        vec![C64::default(), C64::default()],
    );
    let p = im_build(&em, 2).unwrap();
    assert_eq!(p.modes[0].quad.nnz(), 0);
}

#[test]
fn resonance_violation_is_reported_with_offending_tuples() {
    // β_0 + β_0 − β_1 = 0 with a nonzero interaction: hard failure
    let em = tiny_model(
        vec![cr(0.5), cr(1.0)],
        1,
        vec![(0, 0, cr(0.3))],
        vec![C64::default(), C64::default()],
    );
    match im_build(&em, 2) {
        Err(Error::ResonanceViolation { tuples, first }) => {
            assert_eq!(tuples, vec![(vec![0, 0], 1)]);
            assert_eq!(first, (vec![0, 0], 1));
        }
        other => panic!("expected ResonanceViolation, got {other:?}"),
    }

    // the same resonance with a zero coefficient is skipped, not an error:
    // the undetermined monomial is set to zero
    let em = tiny_model(
        vec![cr(0.5), cr(1.0)],
        1,
        vec![(0, 0, cr(0.0))],
        vec![C64::default(), C64::default()],
    );
    let p = im_build(&em, 2).unwrap();
    assert_eq!(p.modes[0].quad.nnz(), 0);
}

#[test]
fn invariant_manifold_matches_pullback_quadrature() {
    let em = random_eigen_model(49, 5, 2, false);
    let p = im_build(&em, 2).unwrap();
    let mut r = rng(10);
    for _ in 0..5 {
        let xi = random_xi(&mut r, 2);
        for n in 2..5 {
            let direct = p.eval_mode(n, &xi);
            let quad = pullback_quadrature(&em, n, &xi, 80.0, 80_000);
            assert!(rel(direct, quad) < 1e-6, "mode {n}: {direct} vs {quad}");
        }
    }
}

#[test]
fn invariant_manifold_homological_residual_vanishes() {
    let em = random_eigen_model(50, 6, 3, false);
    let p = im_build(&em, 2).unwrap();
    let mut r = rng(11);
    for _ in 0..10 {
        let xi = random_xi(&mut r, 3);
        let norm2: f64 = xi.iter().map(|z| z.norm_sqr()).sum();
        // drift direction of the resolved linear flow
        let v: Vec<C64> = (0..3).map(|k| em.betas[k] * xi[k]).collect();
        for n in 3..6 {
            let h = |q: &[C64]| p.eval_mode(n, q);
            let dh_v = fd_directional(h, &xi, &v, 1e-3);
            let mut g2 = C64::default();
            for &(k, l, b) in &em.rows[n] {
                if k < 3 && l < 3 {
                    g2 += b * xi[k] * xi[l];
                }
            }
            let residual = (dh_v - em.betas[n] * h(&xi) - g2).norm();
            assert!(
                residual < 1e-9 * (1.0 + norm2),
                "mode {n}: residual {residual:.3e}"
            );
        }
    }
}

// ---------------------------------------------------------------------------
// invariance equation of the windowed family
// ---------------------------------------------------------------------------

/// Resolved quadratic interaction of mode `n` evaluated at a point.
fn quad_interaction(em: &EigenModel, n: usize, q: &[C64]) -> C64 {
    let m = em.cutoff;
    let mut acc = C64::default();
    for &(k, l, b) in &em.rows[n] {
        if k < m && l < m {
            acc += b * q[k] * q[l];
        }
    }
    acc
}

/// The windowed family must satisfy, mode by mode,
///   DΦ_n(ξ)·(β∘ξ + F_c) − β_n Φ_n(ξ)
///     = Q_n(ξ) − e^{τβ_n} Q_n(S(−τ)ξ) + (1 − e^{τβ_n}) F_n,
/// where S(t) is the affine flow of the resolved linear part and Q_n the
/// resolved quadratic interaction. This pins the whole U/V/forcing structure,
/// not just individual coefficients.
#[test]
fn windowed_family_satisfies_its_invariance_equation() {
    for (seed, forced) in [(51, true), (52, false)] {
        let em = random_eigen_model(seed, 6, 3, forced);
        let m = em.cutoff;
        let taus: BTreeMap<usize, f64> =
            (3..6).map(|n| (n, 0.3 + 0.17 * (n - 3) as f64)).collect();
        let p = lia_build(&em, &taus);
        let mut r = rng(12);

        for _ in 0..6 {
            let xi = random_xi(&mut r, m);
            // drift of the resolved equations at ξ
            let drift: Vec<C64> = (0..m).map(|k| em.betas[k] * xi[k] + em.forcing[k]).collect();
            for n in 3..6 {
                let tau = taus[&n];
                let phi = |q: &[C64]| p.eval_mode(n, q);
                let lhs = fd_directional(phi, &xi, &drift, 1e-3) - em.betas[n] * phi(&xi);

                // resolved state transported backward over the window
                let back: Vec<C64> = (0..m)
                    .map(|k| {
                        let bk = em.betas[k];
                        let decay = (-bk * tau).exp();
                        let ramp = if bk.norm() < 1e-12 {
                            cr(tau)
                        } else {
                            (cr(1.0) - decay) / bk
                        };
                        decay * xi[k] - ramp * em.forcing[k]
                    })
                    .collect();
                let growth = (em.betas[n] * tau).exp();
                let rhs = quad_interaction(&em, n, &xi) - growth * quad_interaction(&em, n, &back)
                    + (cr(1.0) - growth) * em.forcing[n];

                let err = (lhs - rhs).norm();
                assert!(
                    err < 1e-8 * (1.0 + rhs.norm()),
                    "mode {n} (forced: {forced}): residual {err:.3e}"
                );
            }
        }
    }
}

#[test]
fn long_window_limit_recovers_the_invariant_manifold() {
    // unforced, every interaction gap has positive real part: resolved modes
    // near neutral, unresolved strongly stable
    let em = tiny_wide_gap_model();
    let min_gap = 4.0; // by construction below
    let tau = 40.0 / min_gap;
    let lia = lia_build(&em, &taus_all(&em, tau));
    let im = im_build(&em, 2).unwrap();
    let mut r = rng(13);
    for _ in 0..10 {
        let xi = random_xi(&mut r, 2);
        for n in 2..4 {
            let a = lia.eval_mode(n, &xi);
            let b = im.eval_mode(n, &xi);
            assert!(rel(a, b) < 1e-6, "mode {n}: {a} vs {b}");
        }
    }
}

fn tiny_wide_gap_model() -> EigenModel {
    let betas = vec![
        C64::new(0.1, 0.8),
        C64::new(-0.2, -0.5),
        C64::new(-5.0, 1.0),
        C64::new(-6.0, -0.7),
    ];
    let mut rows = vec![Vec::new(); 4];
    rows[2] = vec![
        (0, 0, C64::new(0.4, -0.6)),
        (0, 1, C64::new(-0.7, 0.2)),
        (1, 1, C64::new(0.3, 0.9)),
    ];
    rows[3] = vec![(1, 0, C64::new(0.8, 0.1)), (1, 1, C64::new(-0.2, -0.4))];
    EigenModel {
        betas: Array1::from_vec(betas),
        rows,
        cubic_rows: vec![Vec::new(); 4],
        forcing: Array1::zeros(4),
        cutoff: 2,
        band: 4,
        basis: None,
    }
}

// ---------------------------------------------------------------------------
// τ-derivatives of the coefficient bundles
// ---------------------------------------------------------------------------

#[test]
fn coefficient_bundle_derivatives_match_finite_differences() {
    let em = random_eigen_model(53, 5, 2, true);
    let mut r = rng(14);
    let xi = random_xi(&mut r, 2);
    let (tau, eps) = (0.8, 1e-5);

    for family in [Family::Lia, Family::Qsa, Family::KTau] {
        for n in 2..5 {
            let at = |t: f64| tau_coeffs(family, &em, n, t).unwrap().eval(&xi);
            let fd = (at(tau + eps) - at(tau - eps)) / cr(2.0 * eps);
            let exact = tau_coeffs(family, &em, n, tau).unwrap().eval_dtau(&xi);
            assert!(
                (fd - exact).norm() < 1e-7 * (1.0 + exact.norm()),
                "{family} mode {n}: fd {fd} vs exact {exact}"
            );
        }
    }
}

#[test]
fn coefficient_bundle_eval_agrees_with_built_polynomial() {
    let em = random_eigen_model(54, 5, 2, true);
    let tau = 0.6;
    let p = lia_build(&em, &taus_all(&em, tau));
    let mut r = rng(15);
    let xi = random_xi(&mut r, 2);
    for n in 2..5 {
        let bundle = tau_coeffs(Family::Lia, &em, n, tau).unwrap();
        assert!((bundle.eval(&xi) - p.eval_mode(n, &xi)).norm() < 1e-12);
    }
}

// ---------------------------------------------------------------------------
// evaluation plumbing
// ---------------------------------------------------------------------------

#[test]
fn polynomial_evaluation_matches_naive_summation() {
    let em = random_eigen_model(55, 6, 3, true);
    let p = lia_build(&em, &taus_all(&em, 0.5));
    let mut r = rng(16);
    let xi = random_xi(&mut r, 3);
    for n in 3..6 {
        let mode = &p.modes[n - 3];
        let mut naive = mode.constant;
        for i in 0..3 {
            naive += mode.linear[i] * xi[i];
        }
        for i in 0..3 {
            for j in 0..3 {
                naive += mode.quad.get(i, j, 3) * xi[i] * xi[j];
            }
        }
        assert!((naive - p.eval_mode(n, &xi)).norm() < 1e-12);
    }
}

#[test]
fn dense_and_sparse_quadratic_tables_evaluate_identically() {
    let triplets = vec![
        (0u32, 1u32, C64::new(0.3, -0.8)),
        (1, 0, C64::new(-0.5, 0.2)),
        (2, 2, C64::new(0.9, 0.4)),
        (0, 1, C64::new(0.1, 0.1)), // duplicate accumulates
    ];
    let m = 3;
    let mut dense = vec![C64::default(); m * m];
    for &(i, j, v) in &triplets {
        dense[i as usize * m + j as usize] += v;
    }
    let (qs, qd) = (QuadCoeffs::Sparse(triplets), QuadCoeffs::Dense(dense));
    let mut r = rng(17);
    let xi = random_xi(&mut r, m);
    assert!((qs.eval(&xi) - qd.eval(&xi)).norm() < 1e-14);
    assert!((qs.get(0, 1, m) - qd.get(0, 1, m)).norm() < 1e-15);
}

#[test]
fn lift_concatenates_resolved_and_predicted_amplitudes() {
    let em = random_eigen_model(56, 5, 2, true);
    let p = lia_build(&em, &taus_all(&em, 0.4));
    let mut r = rng(18);
    let xi = random_xi(&mut r, 2);
    let full = p.lift(&xi);
    assert_eq!(full.len(), 5);
    assert_eq!(full[0], xi[0]);
    assert_eq!(full[1], xi[1]);
    let tail = p.eval(&xi);
    for n in 2..5 {
        assert_eq!(full[n], tail[n - 2]);
    }
}

#[test]
fn family_names_round_trip() {
    for f in [
        Family::Lia,
        Family::Qsa,
        Family::KTau,
        Family::Im2,
        Family::Im3,
        Family::Zero,
    ] {
        assert_eq!(Family::from_name(f.name()).unwrap(), f);
    }
    assert!(matches!(
        Family::from_name("nonsense"),
        Err(Error::Config(_))
    ));
}

// ---------------------------------------------------------------------------
// cubic-order manifold
// ---------------------------------------------------------------------------

#[test]
fn cubic_manifold_order_uses_the_cubic_tensor() {
    let mut em = tiny_model(
        vec![cr(-0.1), cr(-2.0)],
        1,
        vec![(0, 0, cr(0.5))],
        vec![C64::default(), C64::default()],
    );
    em.cubic_rows[1] = vec![(0, 0, 0, C64::new(0.3, 0.1))];

    let p2 = im_build(&em, 2).unwrap();
    assert!(p2.modes[0].cubic.is_empty());

    let p3 = im_build(&em, 3).unwrap();
    assert_eq!(p3.modes[0].cubic.len(), 1);
    // coefficient: value / (3β_0 − β_1)
    let denom = cr(3.0 * -0.1 + 2.0);
    let expect = C64::new(0.3, 0.1) / denom;
    assert!((p3.modes[0].cubic[0].3 - expect).norm() < 1e-14);

    // evaluation includes the cubic monomial
    let xi = [C64::new(0.4, -0.7)];
    let diff = p3.eval_mode(1, &xi) - p2.eval_mode(1, &xi);
    assert!((diff - expect * xi[0] * xi[0] * xi[0]).norm() < 1e-13);

    // quadratic families are untouched by the cubic tensor
    let quad_only = im_build(&em, 2).unwrap();
    assert_eq!(quad_only.family, Family::Im2);
    assert_eq!(p3.family, Family::Im3);
}

// ---------------------------------------------------------------------------
// conjugate symmetry on real systems
// ---------------------------------------------------------------------------

#[test]
fn real_systems_keep_conjugate_pairs_conjugate() {
    use pm_closure::model::{decompose, to_eigen_model};
    use rand::Rng;

    let model = common::real_block_model(57, true);
    let basis = decompose(&model, 3).unwrap();
    let em = to_eigen_model(&model, &basis).unwrap();
    // unresolved spectrum: −1.2 ± 0.7i at indices 3,4 and −2.0 at index 5
    let taus = taus_all(&em, 0.45);

    let params = vec![
        lia_build(&em, &taus),
        qsa_build(&em, &taus),
        ktau_build(&em, &taus).unwrap(),
        im_build(&em, 2).unwrap(),
    ];

    let mut r = rng(19);
    for _ in 0..5 {
        // resolved amplitudes of a random real physical state
        let x = Array1::from_iter((0..6).map(|_| cr(r.gen_range(-1.0..1.0))));
        let xi_full = basis.to_eigen(&x);
        let xi: Vec<C64> = (0..3).map(|k| xi_full[k]).collect();

        for p in &params {
            let out = p.eval(&xi);
            let pair_err = (out[1] - out[0].conj()).norm();
            assert!(pair_err < 1e-10, "{}: pair error {pair_err:.3e}", p.family);
            assert!(
                out[2].im.abs() < 1e-10,
                "{}: real-mode imaginary part {:.3e}",
                p.family,
                out[2].im
            );

            // the lifted state is a real physical state
            let lifted = basis.from_eigen(&p.lift(&xi));
            let imag = lifted.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
            assert!(imag < 1e-10, "{}: lifted state imag {imag:.3e}", p.family);
        }
    }
}
