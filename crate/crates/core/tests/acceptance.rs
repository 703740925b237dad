//! Acceptance run: one PASS/FAIL line per criterion, with diagnostics.
//!
//! Criteria that are known not to hold are listed in `KNOWN_FAILURES`; the run
//! exits nonzero on any other failure, or if a known failure starts passing.

use std::time::Instant;

use nalgebra::{Vector2, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use olsen::blowup::{equilibria_chart1, m1_residual, EquilibriumKind};
use olsen::candidates::{solve_candidate, w_c, w_c_prime_at_xi, w_j};
use olsen::config::Preset;
use olsen::integrate::{integrate, IntegratorConfig, Method};
use olsen::loops::{landing_point, loop_y, LoopSpec, LoopSystem};
use olsen::manifolds::branch_expansions;
use olsen::model::{transform_params, OlsenParams, OriginalSystem};
use olsen::returnmap::{epsilon_sweep, lemma_checks, strictly_decreasing, OrbitOptions};
use olsen::transcritical::{
    fast_linearization, fast_linearization_matrix, lambda_tc, loglog_slope, m2_residual_on_ray, observe_exit,
    PassageCase,
};

/// (criterion, sub-claim) pairs that fail for documented reasons.
const KNOWN_FAILURES: &[(u32, &str)] = &[(7, "p2 eigenvalues {-2 kappa, 0}"), (8, "jump d_H strictly decreasing")];

struct Report {
    lines: Vec<(u32, String, bool)>,
}

impl Report {
    fn claim(&mut self, id: u32, what: &str, ok: bool, detail: String) {
        println!("  [{}] {what}: {detail}", if ok { "ok" } else { "FAIL" });
        self.lines.push((id, what.to_string(), ok));
    }

    fn criterion(&self, id: u32, title: &str, secs: f64) {
        let ok = self.lines.iter().filter(|l| l.0 == id).all(|l| l.2);
        println!("criterion {id}: {} {title} ({secs:.2} s)", if ok { "PASS" } else { "FAIL" });
    }
}

fn two_sig_match(value: f64, table: f64) -> bool {
    let unit = 10f64.powf(table.abs().log10().floor() - 1.0);
    (value - table).abs() <= 0.5 * unit
}

fn c1(r: &mut Report) {
    let sp = transform_params(&OlsenParams::standard(0.41)).unwrap();
    let rows = [
        ("mu", sp.mu, 0.97),
        ("alpha", sp.alpha, 0.37),
        ("eps_b", sp.eps_b, 0.062),
        ("eps^2", sp.eps2(), 0.013),
        ("xi", sp.xi, 0.98),
        ("delta", sp.delta, 1.2e-5),
    ];
    for (name, v, t) in rows {
        r.claim(1, name, two_sig_match(v, t), format!("computed {v:.6e}, table {t:e}"));
    }
    let ok = (sp.kappa - 3.796).abs() < 5e-4;
    r.claim(1, "kappa from the transform", ok, format!("computed {:.4}, table prints 3.93 (discrepancy reported)", sp.kappa));
}

fn c2(r: &mut Report) {
    let sp = Preset::Fig6.scaled().unwrap();
    let t = Instant::now();
    let c = solve_candidate(PassageCase::Canard, &sp, 1.3).unwrap().unwrap();
    let j = solve_candidate(PassageCase::Jump, &sp, 1.3).unwrap().unwrap();
    let dt = t.elapsed().as_secs_f64();
    let ok_c = (c.alpha0 - 0.1176).abs() < 1e-2 && (c.beta0 - 0.9402).abs() < 1e-2;
    r.claim(2, "canard corner", ok_c, format!("(alpha0, beta0) = ({:.5}, {:.5})", c.alpha0, c.beta0));
    let ok_j = (j.alpha0 - 0.1362).abs() < 1e-2 && (j.beta0 - 0.9023).abs() < 1e-2;
    r.claim(2, "jump corner", ok_j, format!("(alpha0, beta0) = ({:.5}, {:.5})", j.alpha0, j.beta0));
    r.claim(2, "runtime < 1 s", dt < 1.0, format!("{dt:.3} s for both cases"));
}

fn c3(r: &mut Report) {
    let sp = Preset::Fig6.scaled().unwrap();
    let mu = 1.3;
    let (wc, wj) = (w_c(sp.xi, &sp, mu).unwrap(), w_j(sp.xi, &sp, mu).unwrap());
    r.claim(3, "W_c(xi) = 0", wc.abs() < 1e-12, format!("{wc:e}"));
    r.claim(3, "W_j(xi) = 0", wj.abs() < 1e-12, format!("{wj:e}"));
    // Backward differences (W is defined for beta0 <= xi), Richardson-extrapolated twice.
    let d = |h: f64| (w_c(sp.xi, &sp, mu).unwrap() - w_c(sp.xi - h, &sp, mu).unwrap()) / h;
    let h = 1e-3;
    let (d1, d2, d4) = (d(h), d(h / 2.0), d(h / 4.0));
    let r1 = 2.0 * d2 - d1;
    let r2 = 2.0 * d4 - d2;
    let fd = (4.0 * r2 - r1) / 3.0;
    let exact = w_c_prime_at_xi(&sp, mu);
    let rel = ((fd - exact) / exact).abs();
    r.claim(3, "W_c'(xi) closed form", rel < 1e-5, format!("fd {fd:.10}, closed form {exact:.10}, rel {rel:.2e}"));
    for case in [PassageCase::Canard, PassageCase::Jump] {
        let none = matches!(solve_candidate(case, &sp.with_mu(0.9), 0.9), Ok(None) | Err(_));
        r.claim(3, &format!("no {case:?} root at mu = 0.9"), none, "no admissible root".into());
    }
}

fn c4(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = IntegratorConfig::default().with_tolerances(1e-12, 1e-14);
    let (mut worst_y, mut worst_land, mut worst_line) = (0.0f64, 0.0f64, 0.0f64);
    let mut n = 0;
    while n < 10 {
        let spec = LoopSpec::new(rng.gen_range(1.0..4.0), rng.gen_range(0.85..1.2), 3.93, rng.gen_range(0.02..0.1));
        let Ok(spec) = spec else { continue };
        if 2.0 * spec.alpha1 * spec.beta1 <= 1.1 {
            continue;
        }
        n += 1;
        // The height over a does not depend on the launch height, so a small
        // offset y0 lets the flow leave the invariant plane {y = 0}.
        let y0 = 1e-3;
        let a2 = landing_point(&spec).unwrap();
        let sys = LoopSystem { kappa: spec.kappa, eps_b: spec.eps_b };
        let start = Vector3::new(spec.alpha1, spec.beta1, y0);
        // The a-decay is monotone, so integrate until a passes below a2.
        let sec = olsen::integrate::SectionSpec::coordinate(0, a2, olsen::integrate::Direction::Falling);
        let out = olsen::integrate::Integrator::new(&sys, &cfg).run(start, 0.0, 1e4, std::slice::from_ref(&sec)).unwrap();
        let cross = out.terminal.expect("loop reaches the landing abscissa");
        for s in &out.trajectory.states {
            let exact = loop_y(s[0], &spec).unwrap();
            worst_y = worst_y.max((s[2] - y0 - exact).abs());
            worst_line = worst_line.max((s[1] - spec.eps_b * s[0] - spec.k1()).abs());
        }
        worst_land = worst_land.max((cross.state[2] - y0).abs());
    }
    r.claim(4, "height agrees with the closed form", worst_y < 1e-6, format!("max |dy| = {worst_y:.2e} over 10 loops"));
    r.claim(4, "landing points agree", worst_land < 1e-5, format!("max |y(alpha2) - y0| = {worst_land:.2e}"));
    r.claim(4, "line conserved", worst_line < 1e-8, format!("max |d(b - eps_b a)| = {worst_line:.2e}"));
}

fn c5(r: &mut Report) {
    let sp = Preset::Fig6.scaled().unwrap();
    let radii: Vec<f64> = (0..4).map(|k| 1e-2 / 2f64.powi(k)).collect();
    let m1: Vec<f64> = radii.iter().map(|&e| m1_residual(e, e, 0.7, 0.8, &sp)).collect();
    let s1 = loglog_slope(&radii, &m1);
    r.claim(5, "M1 residual slope", (s1 - 3.0).abs() <= 0.3, format!("{s1:.3}"));
    let dir = Vector2::new(1.0, 0.5).normalize();
    let m2: Vec<f64> = radii.iter().map(|&q| m2_residual_on_ray(q, dir, 1.0, 0.8, &sp, false)).collect();
    let s2 = loglog_slope(&radii, &m2);
    r.claim(5, "M2 residual slope", (s2 - 3.0).abs() <= 0.3, format!("{s2:.3}"));
    let pr: Vec<f64> = radii.iter().map(|&q| m2_residual_on_ray(q, dir, 1.0, 0.8, &sp, true)).collect();
    println!("  [info] M2 graph with the printed coefficients: slope {:.3}", loglog_slope(&radii, &pr));
}

fn c6(r: &mut Report) {
    let sp = Preset::Fig6.scaled().unwrap();
    let cfg = IntegratorConfig::default().with_tolerances(1e-10, 1e-22);
    let eps = [0.1, 0.07, 0.05, 0.035];
    let c = solve_candidate(PassageCase::Canard, &sp, 1.3).unwrap().unwrap();
    let target = 2.0 * sp.xi - c.beta0;
    let errs: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let s = sp.with_eps(e).with_delta(0.0);
            let x0 = (-1.0 / e).exp();
            let st = Vector4::new(c.alpha0, c.beta0, x0, x0 * x0 / (1.0 + c.alpha0 * c.beta0));
            (observe_exit(&s, st, 1e-2, 50.0, &cfg).unwrap().exit_b - target).abs()
        })
        .collect();
    r.claim(6, "delta = 0: exit b -> 2 xi - beta0", strictly_decreasing(&errs), format!("errors {errs:.4?}"));

    let j = solve_candidate(PassageCase::Jump, &sp, 1.3).unwrap().unwrap();
    let b0 = 0.5;
    let errs: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let s = sp.with_eps(e).with_delta(5.0 * e * e);
            let (x, y) = branch_expansions(j.alpha0, b0, s.delta, &s).unwrap().attracting;
            let st = Vector4::new(j.alpha0, b0, x, y);
            (observe_exit(&s, st, 1.0, 50.0, &cfg).unwrap().exit_b - s.xi).abs()
        })
        .collect();
    r.claim(6, "delta = 5 eps^2: exit b -> xi", strictly_decreasing(&errs), format!("errors {errs:.4?}"));

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut ok, mut lo) = (true, f64::INFINITY);
    for i in 0..1000 {
        let xi = rng.gen_range(0.5..1.5);
        let s = sp.with_eps(rng.gen_range(0.01..0.2));
        let s = olsen::model::ScaledParams { xi, eps_b: rng.gen_range(0.005..0.2), ..s };
        let a0 = 1.0 / (2.0 * xi) * rng.gen_range(1.001..5.0);
        let dh = if i % 10 == 0 { 0.0 } else { rng.gen_range(0.0..10.0) };
        let l = lambda_tc(a0, &s, dh).unwrap();
        lo = lo.min(l);
        ok &= l >= 1.0 && ((l == 1.0) == (dh == 0.0));
    }
    r.claim(6, "lambda_tc >= 1, equality iff delta_hat = 0", ok, format!("1000 samples, min {lo}"));
}

fn c7(r: &mut Report) {
    let sp = Preset::Fig6.scaled().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut p1_ok, mut p2_ok, mut p3_ok) = (true, true, true);
    let mut p2_seen = (f64::NAN, f64::NAN);
    let mut absent = 0;
    for _ in 0..100 {
        let (a, b) = (rng.gen_range(0.05..3.0), rng.gen_range(0.2..2.0));
        let eq = equilibria_chart1(a, b, &sp).unwrap();
        let mut ev1 = [eq[0].eigenvalues[0].0, eq[0].eigenvalues[1].0];
        ev1.sort_by(f64::total_cmp);
        p1_ok &= (ev1[0] - 1.0).abs() < 1e-12 && (ev1[1] - 2.0).abs() < 1e-12;
        let mut ev2 = [eq[1].eigenvalues[0].0, eq[1].eigenvalues[1].0];
        ev2.sort_by(f64::total_cmp);
        p2_seen = (ev2[0], ev2[1]);
        p2_ok &= (ev2[0] + 2.0 * sp.kappa).abs() < 1e-9 && ev2[1].abs() < 1e-9;
        let sign = (sp.xi - b) * (2.0 * a * b - 1.0);
        let want = if sign <= 0.0 {
            absent += 1;
            EquilibriumKind::Absent
        } else if b < sp.xi {
            EquilibriumKind::Saddle
        } else {
            EquilibriumKind::Sink
        };
        p3_ok &= eq[2].kind == want;
    }
    r.claim(7, "p1 eigenvalues {1, 2}", p1_ok, "100 random leaves".into());
    r.claim(
        7,
        "p2 eigenvalues {-2 kappa, 0}",
        p2_ok,
        format!("computed {{{:.6}, {:.1e}}} (last sample), -2 kappa = {:.2}", p2_seen.0, p2_seen.1, -2.0 * sp.kappa),
    );
    r.claim(7, "p3 kind from the sign tests", p3_ok, format!("100 random leaves, {absent} absent"));

    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (a, b) = (rng.gen_range(0.05..3.0), rng.gen_range(0.2..1.5));
        let Ok(fl) = fast_linearization(a, b, &sp) else { continue };
        let m = fast_linearization_matrix(a, b, &sp);
        for (l, v) in [(fl.lambda1, fl.v1), (fl.lambda2, fl.v2)] {
            let v = Vector2::new(v.0, v.1);
            worst = worst.max((m * v - l * v).norm() / v.norm());
        }
    }
    r.claim(7, "fast linearization eigenpairs", worst < 1e-12, format!("max residual {worst:.2e}"));
}

fn c8(r: &mut Report) {
    let sp = Preset::Fig6.scaled().unwrap();
    let cfg = IntegratorConfig::default().with_tolerances(1e-10, 1e-13);
    let opts = OrbitOptions::default();
    let eps = [0.12, 0.08, 0.05, 0.035];
    for case in [PassageCase::Canard, PassageCase::Jump] {
        let res = epsilon_sweep(&sp, 1.3, case, &eps, &cfg, &opts);
        let mut dh = Vec::new();
        for (e, o) in eps.iter().zip(&res) {
            match o {
                Ok(o) => {
                    println!(
                        "  [info] {case:?} eps {e}: section {:?}, period {:.4}, |m| {:.3?}, residual {:.1e}, d_H {:.4}",
                        o.section, o.period, o.multiplier_moduli, o.residual, o.hausdorff_to_candidate
                    );
                    dh.push(o.hausdorff_to_candidate);
                }
                Err(err) => {
                    println!("  [info] {case:?} eps {e}: {err}");
                    dh.push(f64::NAN);
                }
            }
        }
        let name = format!("{case:?}").to_lowercase();
        if case == PassageCase::Canard {
            let at = res[2].as_ref();
            let conv = at.is_ok_and(|o| o.residual < opts.tol);
            r.claim(8, "fig6 eps = 0.05 orbit converges", conv, format!("{:?}", at.map(|o| o.iterations)));
            let stable = at.is_ok_and(|o| o.is_stable());
            r.claim(8, "fig6 eps = 0.05 multipliers inside the unit circle", stable, format!("{:?}", at.map(|o| o.multiplier_moduli)));
        }
        let ok = dh.iter().all(|d| d.is_finite()) && strictly_decreasing(&dh);
        r.claim(8, &format!("{name} d_H strictly decreasing"), ok, format!("{dh:.4?}"));
    }
}

fn c9(r: &mut Report) {
    let rho = [0.02, 0.01, 0.005];
    for (preset, case) in [(Preset::Fig6, PassageCase::Canard), (Preset::Fig10, PassageCase::Jump)] {
        let sp = preset.scaled().unwrap();
        let rep = lemma_checks(&sp, 1.3, case, &rho).unwrap();
        let hold = rep.rows.iter().all(|row| row.all_hold());
        let margins: Vec<Vec<f64>> = rep.rows.iter().map(|row| row.checks.iter().map(|c| c.margin).collect()).collect();
        r.claim(9, &format!("{} inequalities ({case:?})", preset.name()), hold, format!("margins {margins:.3?}"));
        // Linear to first order: margin/rho - slope = O(rho), so the deviation halves with rho.
        let dev: Vec<f64> = rep.rows.iter().map(|row| row.linear_deviation()).collect();
        let ratios: Vec<f64> = dev.windows(2).filter(|w| w[0] > 1e-12).map(|w| w[1] / w[0]).collect();
        let linear = ratios.iter().all(|q| (0.4..=0.6).contains(q)) && dev.iter().all(|d| *d < 0.5);
        r.claim(9, &format!("{} margins linear in rho", preset.name()), linear, format!("deviation {dev:.4?}"));
    }
}

/// Distinct levels among local maxima of A on the second half of a long run.
fn peak_levels(k1: f64) -> (usize, usize, Vec<f64>) {
    let p = OlsenParams::standard(k1);
    let mut cfg = IntegratorConfig::default().with_tolerances(1e-9, 1e-12);
    cfg.method = Method::StiffImplicit;
    cfg.max_step = 0.5;
    let t_end = 3000.0;
    let traj = integrate(&OriginalSystem(p), Vector4::new(6.0, 58.0, 0.0, 0.0), 0.0, t_end, &cfg).unwrap();
    let mut peaks = Vec::new();
    for i in 1..traj.times.len() - 1 {
        let (a0, a1, a2) = (traj.states[i - 1][0], traj.states[i][0], traj.states[i + 1][0]);
        if traj.times[i] >= t_end / 2.0 && a1 > a0 && a1 >= a2 {
            peaks.push(a1);
        }
    }
    let mut sorted = peaks.clone();
    sorted.sort_by(f64::total_cmp);
    let mut levels: Vec<f64> = Vec::new();
    for v in sorted {
        if levels.last().is_none_or(|l| (v - l).abs() > 0.01 * l.abs()) {
            levels.push(v);
        }
    }
    (peaks.len(), levels.len(), levels)
}

fn c10(r: &mut Report) {
    let (n, l, lv) = peak_levels(0.41);
    r.claim(10, "k1 = 0.41: one peak level", n >= 2 && l == 1, format!("{n} peaks, levels {lv:.3?}"));
    let (n, l, lv) = peak_levels(0.16);
    r.claim(10, "k1 = 0.16: mixed amplitudes", n >= 2 && l >= 2, format!("{n} peaks, {l} levels, {:.3?}", &lv[..lv.len().min(6)]));
}

fn main() {
    let mut r = Report { lines: Vec::new() };
    let titles = [
        "parameter transform",
        "candidate roots",
        "W identities",
        "loop oracle",
        "center-manifold residual scaling",
        "transcritical delay",
        "eigen-facts",
        "periodic orbit",
        "slow-map lemma suite",
        "full-model phenomenology",
    ];
    let runs: [fn(&mut Report); 10] = [c1, c2, c3, c4, c5, c6, c7, c8, c9, c10];
    for (i, (f, title)) in runs.iter().zip(titles).enumerate() {
        let t = Instant::now();
        println!("-- criterion {}", i + 1);
        f(&mut r);
        r.criterion(i as u32 + 1, title, t.elapsed().as_secs_f64());
    }

    let failed: Vec<(u32, &str)> = r.lines.iter().filter(|l| !l.2).map(|l| (l.0, l.1.as_str())).collect();
    let unexpected: Vec<_> = failed.iter().filter(|f| !KNOWN_FAILURES.contains(f)).collect();
    let fixed: Vec<_> = KNOWN_FAILURES.iter().filter(|k| !failed.contains(k)).collect();
    println!("known failures (documented): {KNOWN_FAILURES:?}");
    if !unexpected.is_empty() || !fixed.is_empty() {
        println!("unexpected failures: {unexpected:?}; known failures now passing: {fixed:?}");
        std::process::exit(1);
    }
    println!("acceptance: all other claims PASS");
}
