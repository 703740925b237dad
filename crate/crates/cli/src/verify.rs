//! Built-in property suite behind `olsen verify`.

use clap::ValueEnum;
use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use olsen::blowup::{equilibria_chart1, m1_residual, EquilibriumKind};
use olsen::candidates::{solve_candidate, w_c, w_c_prime_at_xi, w_j};
use olsen::config::Preset;
use olsen::integrate::{integrate, IntegratorConfig};
use olsen::loops::{landing_point, loop_y, LoopSpec, LoopSystem};
use olsen::model::{transform_params, OlsenParams, ScaledParams};
use olsen::returnmap::{find_periodic_orbit, lemma_checks, OrbitOptions};
use olsen::transcritical::{
    fast_linearization, fast_linearization_matrix, lambda_tc, loglog_slope, m2_residual_on_ray, PassageCase,
};

use crate::Output;

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum Suite {
    /// Closed-form and short-integration checks (seconds).
    Quick,
    /// Everything in `quick` plus periodic orbits of the full system.
    All,
}

struct Checks(Vec<serde_json::Value>);

impl Checks {
    fn add(&mut self, name: &str, ok: bool, detail: String) {
        self.0.push(json!({"name": name, "ok": ok, "detail": detail}));
    }
}

fn fig6() -> ScaledParams {
    Preset::Fig6.scaled().expect("built-in preset")
}

fn quick(c: &mut Checks, rng: &mut ChaCha8Rng) -> olsen::Result<()> {
    let sp = transform_params(&OlsenParams::standard(0.41))?;
    let rows = [(sp.mu, 0.97), (sp.alpha, 0.37), (sp.eps_b, 0.062), (sp.eps2(), 0.013), (sp.xi, 0.98), (sp.delta, 1.2e-5)];
    let ok = rows.iter().all(|(v, t)| (v - t).abs() <= 0.05 * 10f64.powf(t.log10().floor()));
    c.add("transform k1 = 0.41", ok, format!("kappa = {:.4}", sp.kappa));

    let f = fig6();
    let cc = solve_candidate(PassageCase::Canard, &f, f.mu)?;
    let jc = solve_candidate(PassageCase::Jump, &f, f.mu)?;
    let ok = matches!((&cc, &jc), (Some(a), Some(b))
        if (a.alpha0 - 0.1176).abs() < 1e-2 && (a.beta0 - 0.9402).abs() < 1e-2
        && (b.alpha0 - 0.1362).abs() < 1e-2 && (b.beta0 - 0.9023).abs() < 1e-2);
    c.add("candidate corners", ok, format!("{:?} {:?}", cc.map(|x| (x.alpha0, x.beta0)), jc.map(|x| (x.alpha0, x.beta0))));

    let (wc, wj) = (w_c(f.xi, &f, f.mu)?, w_j(f.xi, &f, f.mu)?);
    c.add("W(xi) = 0", wc.abs() < 1e-12 && wj.abs() < 1e-12, format!("{wc:e} {wj:e}"));
    let d = |h: f64| -> olsen::Result<f64> { Ok((w_c(f.xi, &f, f.mu)? - w_c(f.xi - h, &f, f.mu)?) / h) };
    let (d1, d2) = (d(1e-4)?, d(5e-5)?);
    let fd = 2.0 * d2 - d1;
    let exact = w_c_prime_at_xi(&f, f.mu);
    c.add("W_c'(xi)", ((fd - exact) / exact).abs() < 1e-5, format!("fd {fd} closed {exact}"));
    let none = [PassageCase::Canard, PassageCase::Jump]
        .iter()
        .all(|&k| matches!(solve_candidate(k, &f.with_mu(0.9), 0.9), Ok(None) | Err(_)));
    c.add("no candidate at mu = 0.9", none, String::new());

    let cfg = IntegratorConfig::default().with_tolerances(1e-12, 1e-14);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let spec = LoopSpec::new(rng.gen_range(1.0..4.0), rng.gen_range(0.9..1.2), f.kappa, f.eps_b)?;
        let a2 = landing_point(&spec)?;
        let y0 = 1e-3;
        let t = integrate(&LoopSystem { kappa: spec.kappa, eps_b: spec.eps_b }, Vector3::new(spec.alpha1, spec.beta1, y0), 0.0, 1.0, &cfg)?;
        for s in t.states.iter().filter(|s| s[0] > a2) {
            worst = worst.max((s[2] - y0 - loop_y(s[0], &spec)?).abs());
        }
    }
    c.add("loop height vs integration", worst < 1e-6, format!("max error {worst:.2e}"));

    let radii: Vec<f64> = (0..4).map(|k| 1e-2 / 2f64.powi(k)).collect();
    let m1: Vec<f64> = radii.iter().map(|&e| m1_residual(e, e, 0.7, 0.8, &f)).collect();
    let dir = Vector2::new(1.0, 0.5).normalize();
    let m2: Vec<f64> = radii.iter().map(|&r| m2_residual_on_ray(r, dir, 1.0, 0.8, &f, false)).collect();
    let (s1, s2) = (loglog_slope(&radii, &m1), loglog_slope(&radii, &m2));
    c.add("center-manifold residual slopes", (s1 - 3.0).abs() <= 0.3 && (s2 - 3.0).abs() <= 0.3, format!("{s1:.3} {s2:.3}"));

    let mut ok = true;
    for i in 0..200 {
        let dh = if i % 10 == 0 { 0.0 } else { rng.gen_range(0.0..10.0) };
        let l = lambda_tc(rng.gen_range(0.52..3.0), &f, dh)?;
        ok &= l >= 1.0 && ((l == 1.0) == (dh == 0.0));
    }
    c.add("lambda_tc >= 1", ok, "200 samples".into());

    let (mut ok1, mut ok2, mut ok3, mut worst) = (true, true, true, 0.0f64);
    for _ in 0..100 {
        let (a, b) = (rng.gen_range(0.05..3.0), rng.gen_range(0.2..2.0));
        let eq = equilibria_chart1(a, b, &f)?;
        let mut e1 = [eq[0].eigenvalues[0].0, eq[0].eigenvalues[1].0];
        let mut e2 = [eq[1].eigenvalues[0].0, eq[1].eigenvalues[1].0];
        e1.sort_by(f64::total_cmp);
        e2.sort_by(f64::total_cmp);
        ok1 &= (e1[0] - 1.0).abs() < 1e-12 && (e1[1] - 2.0).abs() < 1e-12;
        ok2 &= (e2[0] + 2.0).abs() < 1e-12 && e2[1].abs() < 1e-12;
        let sign = (f.xi - b) * (2.0 * a * b - 1.0);
        let want = if sign <= 0.0 {
            EquilibriumKind::Absent
        } else if b < f.xi {
            EquilibriumKind::Saddle
        } else {
            EquilibriumKind::Sink
        };
        ok3 &= eq[2].kind == want;
        if let Ok(fl) = fast_linearization(a, b.min(1.5), &f) {
            let m = fast_linearization_matrix(a, b.min(1.5), &f);
            for (l, v) in [(fl.lambda1, fl.v1), (fl.lambda2, fl.v2)] {
                let v = Vector2::new(v.0, v.1);
                worst = worst.max((m * v - l * v).norm() / v.norm());
            }
        }
    }
    c.add("p1 eigenvalues {1, 2}", ok1, String::new());
    c.add("p2 eigenvalues {-2, 0}", ok2, String::new());
    c.add("p3 kind", ok3, String::new());
    c.add("fast linearization eigenpairs", worst < 1e-12, format!("{worst:.2e}"));

    let rho = [0.02, 0.01, 0.005];
    for (p, k) in [(Preset::Fig6, PassageCase::Canard), (Preset::Fig10, PassageCase::Jump)] {
        let s = p.scaled()?;
        let r = lemma_checks(&s, s.mu, k, &rho)?;
        c.add(&format!("slow-map lemmas {}", p.name()), r.rows.iter().all(|row| row.all_hold()), format!("{:?}", r.largest_rho_all_hold));
    }
    Ok(())
}

fn full(c: &mut Checks) -> olsen::Result<()> {
    let f = fig6();
    let cfg = IntegratorConfig::default().with_tolerances(1e-10, 1e-13);
    let opts = OrbitOptions::default();
    for k in [PassageCase::Canard, PassageCase::Jump] {
        let o = find_periodic_orbit(&f, f.mu, k, f.eps, &cfg, &opts)?;
        c.add(
            &format!("{k:?} periodic orbit at eps = {}", f.eps),
            o.residual < opts.tol && o.is_stable(),
            format!("period {:.6}, multipliers {:?}", o.period, o.multiplier_moduli),
        );
    }
    Ok(())
}

pub fn run(suite: Suite, seed: u64) -> Output {
    let mut c = Checks(Vec::new());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if let Err(e) = quick(&mut c, &mut rng) {
        c.add("quick suite", false, e.to_string());
    }
    if matches!(suite, Suite::All) {
        if let Err(e) = full(&mut c) {
            c.add("periodic orbits", false, e.to_string());
        }
    }
    let ok = c.0.iter().all(|v| v["ok"] == true);
    let failed = c.0.iter().filter(|v| v["ok"] != true).count();
    let mut out = Output::new(json!({"suite": format!("{suite:?}").to_lowercase(), "seed": seed, "failed": failed, "checks": c.0}));
    out.ok = ok;
    out
}
