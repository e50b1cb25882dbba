//! Contract tests for the window-length optimizers: sign-based descent on
//! synthetic costs with known minimizers, grid-scan shapes (two wells, convex,
//! monotone, flat), the cached variance-budget curve against the direct
//! trajectory evaluation, and correlation-based candidate selection.

mod common;

use std::collections::BTreeMap;

use pm_closure::defect::{correlation, defect_jn, moments, qn_recast};
use pm_closure::error::Error;
use pm_closure::model::EigenModel;
use pm_closure::optimizer::{
    default_tau_max, discriminate_by_correlation, discriminate_with, minimize_jn,
    minimize_qn_descent, minimize_qn_global, minimize_scalar_descent, minimize_smoothed,
    scan_minima, DescentOpts, JnCurve,
};
use pm_closure::param::lia_build;
use pm_closure::{cr, C64};
use rand::Rng;

use common::{hand_param, model_path, poly, random_eigen_model, traj_from};

fn taus_all(em: &EigenModel, tau: f64) -> BTreeMap<usize, f64> {
    (em.cutoff..em.dim()).map(|n| (n, tau)).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}

/// Test-grade golden-section minimizer, the oracle the descent is held to.
fn golden_oracle(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
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

/// Brute-force argmin of `f` over a uniform grid on `[0, hi]`.
fn grid_argmin(f: impl Fn(f64) -> f64, hi: f64, points: usize) -> (f64, f64) {
    let mut best = (0.0, f(0.0));
    for i in 1..points {
        let t = i as f64 * hi / (points - 1) as f64;
        let v = f(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    best
}

// ---------------------------------------------------------------------------
// sign-based descent on synthetic costs
// ---------------------------------------------------------------------------

#[test]
fn descent_finds_the_vertex_of_a_shifted_parabola() {
    let d = minimize_scalar_descent(
        |t| (t - 1.0).powi(2) + 0.3,
        |t| 2.0 * (t - 1.0),
        &DescentOpts::default(),
    )
    .unwrap();
    assert!((d.tau - 1.0).abs() <= 1e-8, "tau = {}", d.tau);
    assert!((d.value - 0.3).abs() <= 1e-12);
    assert!(d.iterations > 0);
}

#[test]
fn descent_pins_monotone_costs_to_the_origin() {
    let d = minimize_scalar_descent(|t| t + 1.0, |_| 1.0, &DescentOpts::default()).unwrap();
    assert_eq!(d.tau, 0.0);
    assert_eq!(d.value, 1.0);
}

#[test]
fn descent_pins_decreasing_costs_to_the_window_cap() {
    let opts = DescentOpts { tau_max: 2.0, ..DescentOpts::default() };
    let d = minimize_scalar_descent(|t| -t, |_| -1.0, &opts).unwrap();
    assert_eq!(d.tau, 2.0);
    assert_eq!(d.value, -2.0);
}

#[test]
fn descent_reports_iteration_exhaustion_with_its_best_iterate() {
    // kink at 0.3: the derivative never drops below the tolerance, so the
    // step must underflow — a tight budget runs out first
    let f = |t: f64| (t - 0.3).abs();
    let fp = |t: f64| if t < 0.3 { -1.0 } else { 1.0 };
    let tight = DescentOpts { max_iter: 20, ..DescentOpts::default() };
    match minimize_scalar_descent(f, fp, &tight) {
        Err(Error::MaxIterExceeded { max_iter, best_tau }) => {
            assert_eq!(max_iter, 20);
            assert!(best_tau > 0.0 && best_tau < 0.6, "best_tau = {best_tau}");
            assert!(f(best_tau) <= f(0.0)); // never ascended
        }
        other => panic!("expected iteration exhaustion, got {other:?}"),
    }
    let d = minimize_scalar_descent(f, fp, &DescentOpts::default()).unwrap();
    assert!((d.tau - 0.3).abs() <= 1e-12, "tau = {}", d.tau);
}

#[test]
fn descent_never_ascends_on_wiggly_costs() {
    let mut r = common::rng(0x0FF5E7);
    for _ in 0..20 {
        let a = r.gen_range(0.05..0.3);
        let b = r.gen_range(5.0..20.0);
        let c = r.gen_range(0.5..2.0);
        let f = move |t: f64| 0.5 * (t - c).powi(2) + a * (b * t).sin();
        let fp = move |t: f64| (t - c) + a * b * (b * t).cos();
        let d = minimize_scalar_descent(f, fp, &DescentOpts::default()).unwrap();
        assert!(d.tau >= 0.0);
        assert!(d.value <= f(0.0) + 1e-12, "ascended: {} > {}", d.value, f(0.0));
        // terminates near a stationary point unless pinned at the origin;
        // "near" because the step may underflow while cost differences are
        // below f64 granularity, stalling at a slope of order √(f″·ulp)
        assert!(
            fp(d.tau).abs() <= 1e-5 || (d.tau == 0.0 && fp(0.0) > 0.0),
            "stopped at tau = {} with slope {}",
            d.tau,
            fp(d.tau)
        );
    }
}

// ---------------------------------------------------------------------------
// descent on the moment recast
// ---------------------------------------------------------------------------

/// On a window cost with a single interior basin, the descent from τ = 0 must
/// land where a dense grid scan plus golden-section refinement lands.
#[test]
fn descent_on_a_single_welled_recast_matches_the_grid_oracle() {
    let (em, traj) = model_path(33, 5, 2, true, 200, 0.02);
    let n = 2;
    let ms = moments(&traj, n, 2);
    let tau_max = 4.0;
    let q = |t: f64| qn_recast(&ms, &em, n, t);

    // the landscape this test assumes: exactly one basin over the window
    let cands = minimize_qn_global(&ms, &em, n, tau_max, 801);
    assert_eq!(cands.len(), 1, "landscape changed: {cands:?}");

    let (bt, _) = grid_argmin(q, tau_max, 8001);
    let h = tau_max / 8000.0;
    let oracle = golden_oracle(q, (bt - h).max(0.0), bt + h, 1e-10);

    let opts = DescentOpts { tau_max, ..DescentOpts::default() };
    let d = minimize_qn_descent(&ms, &em, n, &opts).unwrap();
    assert!(
        (d.tau - oracle).abs() <= 1e-6,
        "descent {} vs oracle {}",
        d.tau,
        oracle
    );
    assert!(d.value <= q(oracle) + 1e-12 * (1.0 + q(oracle).abs()));
    assert!((cands[0].0 - oracle).abs() <= 1e-6);
}

// ---------------------------------------------------------------------------
// grid scan shapes
// ---------------------------------------------------------------------------

#[test]
fn global_scan_orders_two_wells_by_depth() {
    // wells near 0.5 and 2.0; the 0.05·τ tilt makes the left one deeper
    let f = |t: f64| (t - 0.5).powi(2) * (t - 2.0).powi(2) + 0.05 * t;
    let fp = |t: f64| {
        2.0 * (t - 0.5) * (t - 2.0).powi(2) + 2.0 * (t - 0.5).powi(2) * (t - 2.0) + 0.05
    };
    let cands = scan_minima(f, fp, 3.0, 600);
    assert_eq!(cands.len(), 2, "{cands:?}");
    assert!((cands[0].0 - 0.5).abs() <= 0.05, "{cands:?}");
    assert!((cands[1].0 - 2.0).abs() <= 0.05, "{cands:?}");
    assert!(cands[0].1 <= cands[1].1);

    // the best candidate agrees with brute force on a much finer grid
    let (bt, bv) = grid_argmin(f, 3.0, 20001);
    assert!((cands[0].0 - bt).abs() <= 3.0 / 599.0 + 1e-9);
    assert!(cands[0].1 <= bv + 1e-12);
}

#[test]
fn global_scan_handles_convex_monotone_and_flat_shapes() {
    // convex: one refined minimum
    let c = scan_minima(|t| (t - 1.0).powi(2) + 0.3, |t| 2.0 * (t - 1.0), 3.0, 601);
    assert_eq!(c.len(), 1);
    assert!((c[0].0 - 1.0).abs() <= 1e-6 && (c[0].1 - 0.3).abs() <= 1e-12);

    // increasing: pinned to the origin
    let c = scan_minima(|t| 0.1 * t, |_| 0.1, 3.0, 601);
    assert_eq!(c.len(), 1);
    assert_eq!(c[0], (0.0, 0.0));

    // decreasing: pinned to the window cap
    let c = scan_minima(|t| -0.1 * t, |_| -0.1, 3.0, 601);
    assert_eq!(c.len(), 1);
    assert!((c[0].0 - 3.0).abs() <= 1e-12 && (c[0].1 + 0.3).abs() <= 1e-12);

    // flat: both endpoints qualify and the origin is reported first
    let c = scan_minima(|_| 2.0, |_| 0.0, 3.0, 601);
    assert_eq!(c.len(), 2);
    assert_eq!(c[0], (0.0, 2.0));
}

#[test]
fn global_recast_scan_stays_within_a_grid_step_of_brute_force() {
    let (em, traj) = model_path(33, 5, 2, true, 200, 0.02);
    let tau_max = 6.0;
    let grid_points = 1201;
    let h = tau_max / (grid_points - 1) as f64;
    for n in 2..5 {
        let ms = moments(&traj, n, 2);
        let cands = minimize_qn_global(&ms, &em, n, tau_max, grid_points);
        assert!(!cands.is_empty());
        let (bt, bv) = grid_argmin(|t| qn_recast(&ms, &em, n, t), tau_max, 12001);
        let close = (cands[0].0 - bt).abs() <= h + 1e-9;
        let as_good = cands[0].1 <= bv + 1e-12 * (1.0 + bv.abs());
        assert!(
            close || as_good,
            "mode {n}: best ({}, {}) vs brute ({bt}, {bv})",
            cands[0].0,
            cands[0].1
        );
    }
}

// ---------------------------------------------------------------------------
// cached variance-budget curve
// ---------------------------------------------------------------------------

/// The moment-cached curve must reproduce the direct trajectory sweep of the
/// variance mismatch at every window length, forced or not.
#[test]
fn fast_jn_curve_matches_direct_evaluation() {
    for (seed, forced) in [(19, true), (20, false)] {
        let (em, traj) = model_path(seed, 6, 3, forced, 250, 0.02);
        for n in 3..6 {
            let curve = JnCurve::collect(&traj, &em, n);
            for tau in [0.0, 0.3, 1.1, 2.5] {
                let p = lia_build(&em, &taus_all(&em, tau));
                let direct = defect_jn(&traj, &p, n).unwrap();
                let fast = curve.eval(&em, tau);
                assert!(
                    rel(fast, direct) <= 1e-10,
                    "seed {seed} mode {n} tau {tau}: {fast} vs {direct}"
                );
            }
        }
    }
}

#[test]
fn smoothed_grid_keeps_a_sharp_minimum_near_the_origin() {
    // kink at 0.02 under a fast ripple the averaging is meant to ride over
    let f = |t: f64| (t - 0.02).abs() + 0.002 * (300.0 * t).sin();
    let star = minimize_smoothed(f, 1.0, 2000, 5);
    assert!(star > 0.0, "collapsed to the origin");
    assert!((star - 0.02).abs() <= 0.005, "star = {star}");
}

#[test]
fn smoothed_grid_refines_a_smooth_basin_to_golden_precision() {
    let star = minimize_smoothed(|t| (t - 1.0).powi(2), 3.0, 2000, 5);
    assert!((star - 1.0).abs() <= 1e-6, "star = {star}");
}

#[test]
fn smoothed_grid_reports_the_origin_on_flat_cost() {
    let star = minimize_smoothed(|_| 1.0, 3.0, 2000, 5);
    assert_eq!(star, 0.0);
}

#[test]
fn minimize_jn_tracks_the_dense_grid_on_trajectory_data() {
    let (em, traj) = model_path(19, 6, 3, true, 250, 0.02);
    let tau_max = 4.0;
    for n in 3..6 {
        let star = minimize_jn(&traj, &em, n, tau_max, 800, 5);
        assert!((0.0..=tau_max).contains(&star));
        let curve = JnCurve::collect(&traj, &em, n);
        let jstar = curve.eval(&em, star);
        let (_, bv) = grid_argmin(|t| curve.eval(&em, t), tau_max, 4001);
        assert!(
            jstar <= bv + 1e-6 * (1.0 + bv),
            "mode {n}: J(star) = {jstar} vs dense minimum {bv}"
        );
    }
}

// ---------------------------------------------------------------------------
// candidate discrimination
// ---------------------------------------------------------------------------

/// Alternating-sign training data where the unresolved mode equals the
/// resolved one exactly. Candidate A (keyed τ = 0) has the smaller cost but an
/// imaginary offset that tilts every prediction; candidate B (keyed τ = 1)
/// costs more yet is perfectly aligned. Correlation must pick B.
#[test]
fn correlation_overrides_cost_when_candidates_disagree() {
    let states: Vec<Vec<C64>> = (0..8)
        .map(|k| {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            vec![cr(s), cr(s)]
        })
        .collect();
    let traj = traj_from(0.5, states);
    let tilted = || hand_param(2, 1, vec![poly(1, C64::new(0.0, 0.6), vec![cr(1.0)])]);
    let aligned = || hand_param(2, 1, vec![poly(1, cr(0.0), vec![cr(0.1)])]);

    let candidates = vec![vec![(0.0, 0.36), (1.0, 0.81)]];
    let sel = discriminate_with(&traj, &candidates, 2, |taus| {
        if taus[0] == 0.0 {
            tilted()
        } else {
            aligned()
        }
    });
    assert_eq!(sel.taus, vec![1.0]);
    assert!((sel.mean_c - 1.0).abs() <= 1e-12, "mean_c = {}", sel.mean_c);
    assert!((sel.total_q - 0.81).abs() <= 1e-15);

    // trimming to the single best-cost candidate removes B from the running
    let sel = discriminate_with(&traj, &candidates, 1, |taus| {
        if taus[0] == 0.0 {
            tilted()
        } else {
            aligned()
        }
    });
    assert_eq!(sel.taus, vec![0.0]);
    assert!((sel.mean_c - 1.0 / 1.36f64.sqrt()).abs() <= 1e-12);
}

#[test]
fn exact_correlation_ties_break_toward_the_smaller_cost() {
    let states: Vec<Vec<C64>> = (0..6)
        .map(|k| {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            vec![cr(s), cr(s)]
        })
        .collect();
    let traj = traj_from(0.5, states);
    let same = || hand_param(2, 1, vec![poly(1, cr(0.0), vec![cr(0.5)])]);

    let candidates = vec![vec![(5.0, 0.7), (3.0, 0.2)]];
    let sel = discriminate_with(&traj, &candidates, 2, |_| same());
    assert_eq!(sel.taus, vec![3.0]);
    assert!((sel.total_q - 0.2).abs() <= 1e-15);

    // a single candidate is returned as-is
    let sel = discriminate_with(&traj, &[vec![(0.7, 0.5)]], 2, |_| same());
    assert_eq!(sel.taus, vec![0.7]);
}

/// End-to-end discrimination for the windowed family: the winner must be one
/// of the offered candidates per mode and at least as correlated as the
/// all-lowest-cost combination it competes against.
#[test]
fn windowed_family_discrimination_picks_an_offered_combination() {
    let (em, traj) = model_path(19, 6, 3, true, 250, 0.02);
    let tau_max = 4.0;
    let cands: Vec<Vec<(f64, f64)>> = (3..6)
        .map(|n| {
            let ms = moments(&traj, n, 3);
            let c = minimize_qn_global(&ms, &em, n, tau_max, 401);
            assert!(!c.is_empty());
            c
        })
        .collect();
    let k_best = 2;
    let sel = discriminate_by_correlation(&traj, &em, &cands, k_best);
    assert_eq!(sel.taus.len(), 3);
    assert!((-1.0..=1.0).contains(&sel.mean_c));
    for (list, t) in cands.iter().zip(&sel.taus) {
        assert!(
            list.iter().take(k_best).any(|c| c.0 == *t),
            "selected τ = {t} is not an offered candidate"
        );
    }

    // the all-lowest-cost combination never beats the winner on correlation
    let best_q: BTreeMap<usize, f64> =
        (3..6).zip(cands.iter().map(|c| c[0].0)).collect();
    let p = lia_build(&em, &best_q);
    let mut sum = 0.0;
    let mut count = 0;
    for (_, c, _) in correlation(&traj, &p).defined() {
        sum += c;
        count += 1;
    }
    assert!(count > 0);
    assert!(sel.mean_c >= sum / count as f64 - 1e-12);
}

// ---------------------------------------------------------------------------
// window cap
// ---------------------------------------------------------------------------

#[test]
fn window_cap_is_fifty_decay_times_of_the_slowest_parameterized_mode() {
    let em = random_eigen_model(7, 6, 3, false);
    let cap = default_tau_max(&em);
    assert!((cap * em.betas[em.cutoff].re.abs() - 50.0).abs() <= 1e-12);
    let opts = DescentOpts::for_model(&em);
    assert_eq!(opts.tau_max, cap);
    assert!(DescentOpts::default().tau_max.is_infinite());
}
