use nalgebra::{Vector3, Vector4};

use olsen::blowup::{chart12, chart21, from_chart1, rhs_chart1_raw, to_chart1, Chart1State};
use olsen::candidates::{intersect_windows, mu_window_scan, solve_candidate, w_roots, BETA_FLOOR, ROOT_GRID};
use olsen::config::Preset;
use olsen::integrate::{integrate, IntegratorConfig};
use olsen::manifolds::{branch_expansions, exact_branches, ExclusionBall, DEFAULT_UPSILON};
use olsen::model::{rhs_fast, rhs_scaled, scale_state, ScaledParams, StateF, StateS};
use olsen::returnmap::{find_periodic_orbit, poincare_return, OrbitOptions, SectionFrame, DEFAULT_K, DEFAULT_RHO};
use olsen::transcritical::{pi_root, pi_wiwo, tc_coefficients, PassageCase, PlaneWithPi};

fn fig6() -> ScaledParams {
    Preset::Fig6.scaled().unwrap()
}

#[test]
fn fast_field_is_the_rescaled_slow_field() {
    let sp = fig6().with_delta(3e-4);
    let e = sp.eps;
    for s in [StateS::new(0.3, 0.9, 0.2, 0.05), StateS::new(2.0, 0.4, 1.5, 3.0)] {
        let f = rhs_fast(scale_state(s, e), &sp);
        let g = rhs_scaled(s, &sp);
        // tau = s/eps^2, x = eps x2, y = eps^2 y2.
        let want = [e * e * g.a2, e * e * g.b2, e.powi(3) * g.x2, e.powi(4) * g.y2];
        for (u, v) in [f.a, f.b, f.x, f.y].into_iter().zip(want) {
            assert!((u - v).abs() <= 1e-13 * v.abs().max(1e-3), "{u} vs {v}");
        }
    }
}

#[test]
fn chart_transitions_compose() {
    let c = Chart1State::new(0.7, 0.8, 0.1, 2.0, 0.5);
    let (s, r2) = chart12(c).unwrap();
    let (f, eps) = from_chart1(c).unwrap();
    let g = scale_state(s, r2);
    assert!((eps - r2).abs() < 1e-16);
    for (u, v) in [(f.a, g.a), (f.b, g.b), (f.x, g.x), (f.y, g.y)] {
        assert!((u - v).abs() < 1e-15);
    }
    let back = chart21(s, r2).unwrap();
    for (u, v) in back.to_vector().iter().zip(c.to_vector().iter()) {
        assert!((u - v).abs() < 1e-15);
    }
    let st = StateF::new(0.4, 0.6, 0.02, 3e-4);
    let (f2, e2) = from_chart1(to_chart1(st, 0.05).unwrap()).unwrap();
    assert!((f2.y - st.y).abs() < 1e-18 && (e2 - 0.05).abs() < 1e-16);
}

#[test]
fn chart1_field_pushes_forward_to_the_slow_field() {
    // d(chart12) applied to the undivided chart-1 field is eps^3 times the slow field.
    let base = fig6().with_delta(0.0);
    for (a, b, r, y, e) in [(0.7, 0.8, 0.1, 1.2, 0.4), (1.3, 0.5, 0.05, 0.3, 0.9), (0.2, 1.1, 0.02, 0.7, 1.5)] {
        let c = Chart1State::new(a, b, r, y, e);
        let (s, eps) = chart12(c).unwrap();
        let sp = base.with_eps(eps);
        let v = c.to_vector();
        let d = rhs_chart1_raw(c, &sp).to_vector();
        let h = 1e-7;
        let p = chart12(Chart1State::from_vector(&(v + d * h))).unwrap().0.to_vector();
        let m = chart12(Chart1State::from_vector(&(v - d * h))).unwrap().0.to_vector();
        let f = rhs_scaled(s, &sp).to_vector() * eps.powi(3);
        let jd = (p - m) / (2.0 * h);
        assert!((jd - f).norm() <= 1e-6 * f.norm(), "{jd} vs {f}");
    }
}

#[test]
fn branch_expansions_have_third_order_error() {
    let sp = fig6();
    let (a2, b2) = (0.9, 0.7);
    let err = |d: f64| {
        let s = sp.with_delta(d);
        let ex = exact_branches(a2, b2, &s);
        let br = branch_expansions(a2, b2, d, &s).unwrap();
        let (xa, _) = br.attracting;
        let (xr, _) = br.repelling.unwrap();
        ((xa - ex[0].0).abs(), (xr - ex[1].0).abs())
    };
    let (e1, e2) = (err(1e-3), err(5e-4));
    assert!((e1.0 / e2.0).log2() > 2.7, "{e1:?} {e2:?}");
    assert!((e1.1 / e2.1).log2() > 2.7, "{e1:?} {e2:?}");
}

#[test]
fn way_in_way_out_matches_quadrature() {
    let sp = fig6();
    let (a0, b0) = (0.1176, 0.9402);
    let s1 = pi_root(0.0, b0, &sp).unwrap();
    let cfg = IntegratorConfig::explicit().with_tolerances(1e-13, 1e-15);
    let tr = integrate(&PlaneWithPi(sp), Vector3::new(a0, b0, 0.0), 0.0, s1, &cfg).unwrap();
    for (t, y) in tr.times.iter().zip(&tr.states) {
        assert!((y[2] - pi_wiwo(*t, 0.0, b0, &sp)).abs() < 1e-12);
    }
    assert!(tr.last().1[2].abs() < 1e-12);
}

#[test]
fn zero_delta_center_manifold_keeps_its_line_of_zeros() {
    let sp = fig6().with_delta(0.0);
    let c = tc_coefficients(0.8, &sp).unwrap();
    for b in [0.5, 0.98, 1.4] {
        assert_eq!(c.reduced_rhs(0.0, b, sp.xi), 0.0);
    }
}

#[test]
fn candidate_roots_are_grid_independent() {
    let sp = fig6();
    for case in [PassageCase::Canard, PassageCase::Jump] {
        let coarse = w_roots(case, &sp, 1.3, BETA_FLOOR, ROOT_GRID);
        let fine = w_roots(case, &sp, 1.3, BETA_FLOOR, 4 * ROOT_GRID);
        assert_eq!(coarse.len(), fine.len(), "{case:?}");
        for (u, v) in coarse.iter().zip(&fine) {
            assert!((u - v).abs() < 1e-6);
        }
    }
}

#[test]
fn mu_windows_contain_the_figure_value() {
    let sp = fig6();
    let c = mu_window_scan(PassageCase::Canard, &sp, (1.0, 2.0), 101).unwrap();
    let j = mu_window_scan(PassageCase::Jump, &sp, (1.0, 2.0), 101).unwrap();
    let has = |w: &[olsen::candidates::MuWindow]| w.iter().any(|w| w.mu_lo <= 1.3 && 1.3 <= w.mu_hi);
    assert!(has(&c) && has(&j), "{c:?} {j:?}");
    assert!(!intersect_windows(&c, &j).is_empty());
}

#[test]
fn return_map_contracts_in_b() {
    let sp = fig6();
    let cand = solve_candidate(PassageCase::Canard, &sp, 1.3).unwrap().unwrap();
    let ball = ExclusionBall::new(sp.xi, DEFAULT_UPSILON).unwrap();
    let frame = SectionFrame::new(DEFAULT_RHO, cand.alpha0, cand.beta0, DEFAULT_K, &ball).unwrap();
    let cfg = IntegratorConfig::default().with_tolerances(1e-10, 1e-13);
    let (b_lo, b_hi) = (cand.beta0 - 0.005, cand.beta0 + 0.005);
    let r_lo = poincare_return(frame.lift(b_lo, &sp).unwrap(), &sp, &frame, &cfg).unwrap();
    let r_hi = poincare_return(frame.lift(b_hi, &sp).unwrap(), &sp, &frame, &cfg).unwrap();
    assert_eq!(r_lo.legs.len(), 3);
    assert!((r_hi.state[1] - r_lo.state[1]).abs() < b_hi - b_lo);
    // Returns land close to the slow plane, and closer as eps decreases.
    let x_back = |eps: f64| {
        let s = sp.with_eps(eps);
        let r = poincare_return(frame.lift(cand.beta0, &s).unwrap(), &s, &frame, &cfg).unwrap();
        (eps * r.state[2], eps * eps * r.state[3])
    };
    let (x1, y1) = x_back(0.05);
    let (x2, y2) = x_back(0.035);
    assert!(x1 < frame.rho && y1 < frame.rho);
    assert!(x2 < x1 && y2 < y1, "{x1} {x2} {y1} {y2}");
    assert!(poincare_return(Vector4::new(0.5, cand.beta0, 0.0, 0.0), &sp, &frame, &cfg).is_err());
}

#[test]
fn periodic_orbit_is_reproducible() {
    let sp = fig6();
    let cfg = IntegratorConfig::default().with_tolerances(1e-10, 1e-13);
    let opts = OrbitOptions::default();
    let a = find_periodic_orbit(&sp, 1.3, PassageCase::Canard, 0.05, &cfg, &opts).unwrap();
    let b = find_periodic_orbit(&sp, 1.3, PassageCase::Canard, 0.05, &cfg, &opts).unwrap();
    assert!(a.residual < opts.tol && a.is_stable());
    for i in 0..3 {
        assert!((a.coords[i] - b.coords[i]).abs() < 1e-8);
        assert!((a.multiplier_moduli[i] - b.multiplier_moduli[i]).abs() < 1e-8);
    }
    // Canard segment: the orbit departs well beyond xi.
    assert!(a.departure_b2 > sp.xi + 0.01, "{}", a.departure_b2);
}
