use nalgebra::{SVector, Vector4};
use proptest::prelude::*;

use olsen::blowup::{m1_flow, rhs_chart1, Chart1State, Chart1System};
use olsen::candidates::{solve_candidate, w_c, w_j};
use olsen::config::Preset;
use olsen::integrate::{integrate, IntegratorConfig};
use olsen::loops::{landing_point, loop_y, LoopSpec};
use olsen::manifolds::{c20_point, classify_point, fast_residuals, ExclusionBall, DEFAULT_UPSILON};
use olsen::model::{
    scale_state, transform_params, unscale_state, FastSystem, OlsenParams, OriginalSystem, ScaledParams, ScaledSystem,
    StateS,
};
use olsen::returnmap::hausdorff_distance;
use olsen::transcritical::{lambda_tc, PassageCase};

fn fig6() -> ScaledParams {
    Preset::Fig6.scaled().unwrap()
}

fn cfg() -> IntegratorConfig {
    IntegratorConfig::default().with_tolerances(1e-9, 1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn positive_orthant_is_forward_invariant(
        a in 0.0..3.0f64, b in 0.0..2.0f64, x in 0.0..2.0f64, y in 0.0..2.0f64, k1 in 0.1..0.5f64,
    ) {
        let c = cfg();
        let v = Vector4::new(a, b, x, y);
        let o = integrate(&OriginalSystem(OlsenParams::standard(k1)), Vector4::new(10.0 * a, 10.0 * b, x, y), 0.0, 20.0, &c).unwrap();
        let s = integrate(&ScaledSystem(fig6()), v, 0.0, 1.0, &c).unwrap();
        let f = integrate(&FastSystem(fig6()), v, 0.0, 20.0, &c).unwrap();
        for st in o.states.iter().chain(&s.states).chain(&f.states) {
            prop_assert!(st.iter().all(|&u| u >= -c.atol), "{st:?}");
        }
    }

    #[test]
    fn slow_and_fast_flows_are_conjugate(
        a in 0.2..2.0f64, b in 0.2..1.5f64, x in 0.0..1.0f64, y in 0.0..1.0f64, eps in 0.05..0.2f64,
    ) {
        let sp = fig6().with_eps(eps).with_delta(1e-4);
        let c = IntegratorConfig::default().with_tolerances(1e-11, 1e-14);
        let s0 = StateS::new(a, b, x, y);
        let s1 = 0.05;
        let slow = integrate(&ScaledSystem(sp), s0.to_vector(), 0.0, s1, &c).unwrap().last().1;
        let f0 = scale_state(s0, eps).to_vector();
        let fast = integrate(&FastSystem(sp), f0, 0.0, s1 / (eps * eps), &c).unwrap().last().1;
        let back = unscale_state(olsen::model::StateF::from_vector(&fast), eps).to_vector();
        for i in 0..4 {
            prop_assert!((back[i] - slow[i]).abs() <= 1e-6 * slow[i].abs().max(1.0), "{i}: {back} vs {slow}");
        }
    }
}

proptest! {
    #[test]
    fn scale_round_trip(a in 0.0..5.0f64, b in 0.0..5.0f64, x in 0.0..5.0f64, y in 0.0..5.0f64, eps in 0.01..0.5f64) {
        let s = StateS::new(a, b, x, y);
        let r = unscale_state(scale_state(s, eps), eps);
        for (u, v) in [(r.a2, a), (r.b2, b), (r.x2, x), (r.y2, y)] {
            prop_assert!((u - v).abs() <= 1e-14 * v.abs().max(1.0));
        }
    }

    #[test]
    fn transform_is_reproducible(k1 in 0.05..1.0f64) {
        let p = OlsenParams::standard(k1);
        prop_assert_eq!(transform_params(&p).unwrap(), transform_params(&p).unwrap());
    }

    #[test]
    fn lambda_tc_at_least_one(xi in 0.5..1.5f64, f in 1.0001..5.0f64, eps_b in 0.005..0.2f64, dh in 0.0..10.0f64) {
        let sp = ScaledParams { xi, eps_b, ..fig6() };
        let l = lambda_tc(f / (2.0 * xi), &sp, dh).unwrap();
        prop_assert!(l >= 1.0);
        prop_assert_eq!(l == 1.0, dh == 0.0);
    }

    #[test]
    fn c20_points_solve_the_fast_equations(b2 in 0.1..2.0f64, x2 in 0.0..3.0f64, delta in 0.0..0.01f64) {
        let sp = fig6().with_delta(delta);
        let q = 2.0 * x2 * x2 + x2 * (b2 - sp.xi) + delta;
        prop_assume!((b2 * q).abs() > 1e-3);
        let (a2, y2) = c20_point(b2, x2, &sp).unwrap();
        prop_assume!(a2.abs() < 1e3);
        let (r1, r2) = fast_residuals(a2, b2, x2, y2, &sp);
        prop_assert!(r1.abs() < 1e-12 && r2.abs() < 1e-12, "{r1:e} {r2:e}");
    }

    #[test]
    fn classification_survives_reprojected_perturbations(b2 in 0.2..0.9f64, x2 in 0.05..2.0f64, t in -1.0..1.0f64) {
        let sp = fig6().with_delta(1e-3);
        let ball = ExclusionBall::new(sp.xi, DEFAULT_UPSILON).unwrap();
        let (a2, _) = c20_point(b2, x2, &sp).unwrap();
        prop_assume!(a2 > 0.0 && a2 < 50.0 && !ball.contains(a2, b2));
        let base = classify_point(a2, b2, x2, &sp, &ball).unwrap();
        // Move b2 by < 1e-8 and re-project onto the manifold along a2.
        let b2p = b2 + 1e-9 * t;
        let (a2p, _) = c20_point(b2p, x2, &sp).unwrap();
        prop_assert_eq!(classify_point(a2p, b2p, x2, &sp, &ball).unwrap(), base);
    }

    #[test]
    fn hausdorff_is_symmetric(pts in proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), 2..12), shift in 0.0..0.5f64) {
        let a: Vec<[f64; 4]> = pts.iter().map(|p| [p.0, p.1, p.2, p.3]).collect();
        let b: Vec<[f64; 4]> = a.iter().rev().map(|p| [p[0] + shift, p[1] * 0.5, p[2], p[3] - shift]).collect();
        prop_assert_eq!(hausdorff_distance(&a, &b).unwrap(), hausdorff_distance(&b, &a).unwrap());
    }

    #[test]
    fn loops_have_one_hump(a1 in 1.0..4.0f64, b1 in 0.85..1.2f64, eps_b in 0.02..0.1f64) {
        let spec = LoopSpec::new(a1, b1, 3.93, eps_b).unwrap();
        prop_assume!(2.0 * a1 * b1 > 1.1);
        let a2 = landing_point(&spec).unwrap();
        // Log-spaced so the landing point is resolved even when it is tiny.
        let (l0, l1) = ((a2 / 100.0).ln(), a1.ln());
        let grid: Vec<f64> = (0..800).map(|i| (l0 + (l1 - l0) * i as f64 / 800.0).exp()).collect();
        let ys: Vec<f64> = grid.iter().map(|&a| loop_y(a, &spec).unwrap()).collect();
        let changes = ys.windows(2).filter(|w| (w[0] < 0.0) != (w[1] < 0.0)).count();
        prop_assert_eq!(changes, 1, "one interior sign change on (0, alpha1)");
        let maxima = ys.windows(3).filter(|w| w[1] > w[0] && w[1] >= w[2]).count();
        prop_assert_eq!(maxima, 1);
        let (y10, y2) = (loop_y(a2 / 10.0, &spec).unwrap(), loop_y(a2 / 2.0, &spec).unwrap());
        prop_assert!(y10 < y2 && y2 < 0.0);
    }

    #[test]
    fn w_vanishes_at_xi(mu in 1.05..2.0f64, alpha in 0.2..0.6f64, eps_b in 0.02..0.1f64) {
        let sp = ScaledParams { mu, alpha, eps_b, ..fig6() };
        prop_assert!(w_c(sp.xi, &sp, mu).unwrap().abs() < 1e-12);
        prop_assert!(w_j(sp.xi, &sp, mu).unwrap().abs() < 1e-12);
    }

    #[test]
    fn candidates_close_and_satisfy_constraints(mu in 1.1..1.6f64) {
        let sp = fig6().with_mu(mu);
        for case in [PassageCase::Canard, PassageCase::Jump] {
            if let Ok(Some(c)) = solve_candidate(case, &sp, mu) {
                prop_assert!(c.closure_residual < 1e-8, "{case:?} mu {mu}: {}", c.closure_residual);
                prop_assert!(c.beta0 < sp.xi && 2.0 * c.alpha0 * c.beta0 < 1.0 && 2.0 * c.alpha1 * c.beta1 > 1.0);
            }
        }
    }

    #[test]
    fn m1_flow_direction(a1 in 0.1..3.0f64, b1 in 0.1..2.0f64, eps1 in 1e-5..1e-3f64) {
        let sp = fig6();
        let q = a1 * b1;
        prop_assume!((2.0 * q - 1.0).abs() > 1e-2);
        let (dr, _) = m1_flow(0.1, eps1, a1, b1, &sp);
        prop_assert_eq!(dr > 0.0, 2.0 * q > 1.0);
    }
}

fn chart_run(c0: Chart1State, sp: &ScaledParams) -> Vec<SVector<f64, 5>> {
    let c = IntegratorConfig::default().with_tolerances(1e-10, 1e-13);
    integrate(&Chart1System(*sp), c0.to_vector(), 0.0, 2.0, &c).unwrap().states
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn chart1_leaves_are_invariant(a1 in 0.2..2.0f64, b1 in 0.2..1.5f64, r1 in 0.0..0.3f64, y1 in 0.0..2.0f64, e1 in 0.0..0.5f64) {
        let sp = fig6().with_delta(0.0);
        for s in chart_run(Chart1State::new(a1, b1, r1, y1, 0.0), &sp) {
            prop_assert!(s[4].abs() <= 1e-13);
        }
        for s in chart_run(Chart1State::new(a1, b1, 0.0, y1, e1), &sp) {
            prop_assert!(s[2].abs() <= 1e-13);
        }
    }

    #[test]
    fn r1_eps1_is_conserved(a1 in 0.2..2.0f64, b1 in 0.2..1.5f64, r1 in 0.01..0.3f64, y1 in 0.0..2.0f64, e1 in 0.01..0.5f64) {
        let sp = fig6().with_delta(0.0);
        let p0 = r1 * e1;
        for s in chart_run(Chart1State::new(a1, b1, r1, y1, e1), &sp) {
            prop_assert!((s[2] * s[4] - p0).abs() <= 1e-7 * p0);
        }
        let d = rhs_chart1(Chart1State::new(a1, b1, r1, y1, e1), &sp);
        prop_assert!((d.r1 * e1 + r1 * d.eps1).abs() < 1e-15);
    }

    #[test]
    fn integration_is_deterministic(a in 0.1..2.0f64, b in 0.1..1.5f64) {
        let v = Vector4::new(a, b, 0.5, 0.2);
        let c = cfg();
        let t1 = integrate(&ScaledSystem(fig6()), v, 0.0, 0.5, &c).unwrap();
        let t2 = integrate(&ScaledSystem(fig6()), v, 0.0, 0.5, &c).unwrap();
        prop_assert_eq!(t1.states, t2.states);
        prop_assert_eq!(t1.times, t2.times);
    }
}
