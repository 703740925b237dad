//! Singular periodic candidate orbits: a slow drift along `{x2 = 0 = y2}`
//! ending in a canard or jump departure, followed by a large loop that lands
//! back on the starting corner `(alpha0, beta0)`.
//!
//! Closure reduces to a scalar equation `W(beta0) = 0` for each case.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::loops::{landing_point, loop_polyline, LoopSpec};
use crate::model::ScaledParams;
use crate::transcritical::{canard_exit, jump_exit, slow_plane_flow, PassageCase};

/// `u coth u`, by series for small `|u|`.
fn u_coth(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        let u2 = u * u;
        1.0 + u2 / 3.0 - u2 * u2 / 45.0
    } else if u.abs() > 700.0 {
        u.abs()
    } else {
        u / u.tanh()
    }
}

/// `u / (e^u - 1)`, by series for small `|u|`.
fn u_over_expm1(u: f64) -> f64 {
    if u.abs() < 1e-6 {
        1.0 - u / 2.0 + u * u / 12.0
    } else if u > 700.0 {
        0.0
    } else if u < -700.0 {
        -u
    } else {
        u / u.exp_m1()
    }
}

fn check_beta0(beta0: f64, sp: &ScaledParams) -> Result<f64> {
    if !(beta0 > 0.0 && beta0 <= sp.xi) {
        return Err(domain(format!("beta0 = {beta0} outside (0, xi]")));
    }
    Ok(sp.alpha * (sp.xi - beta0) / sp.eps_b)
}

/// `w_c(beta0) = alpha (beta0 - xi) coth(alpha (xi - beta0)/eps_b)`; equals `-eps_b` at `xi`.
pub fn w_c_aux(beta0: f64, sp: &ScaledParams) -> Result<f64> {
    let u = check_beta0(beta0, sp)?;
    Ok(-sp.eps_b * u_coth(u))
}

pub fn w_c(beta0: f64, sp: &ScaledParams, mu: f64) -> Result<f64> {
    let w = w_c_aux(beta0, sp)?;
    let (al, eb, xi) = (sp.alpha, sp.eps_b, sp.xi);
    let num = (2.0 * xi - beta0) * (beta0 * al + eb * mu - al * xi + w);
    let den = beta0 * (eb * mu - al * beta0 + al * xi + w);
    let arg = num / den;
    if !(arg > 0.0) || !arg.is_finite() {
        return Err(Error::Branch { factor: "W_c log argument", value: arg });
    }
    Ok(4.0 * (beta0 - xi) * (eb * mu - al * xi) + 4.0 * (beta0 - xi) * w + al * eb * arg.ln())
}

pub fn w_j(beta0: f64, sp: &ScaledParams, mu: f64) -> Result<f64> {
    let u = check_beta0(beta0, sp)?;
    let (al, eb, xi) = (sp.alpha, sp.eps_b, sp.xi);
    let (gp, gm) = (u_over_expm1(u), u_over_expm1(-u));
    let arg = xi * (mu - gm) / (beta0 * (mu - gp));
    if !(arg > 0.0) || !arg.is_finite() {
        return Err(Error::Branch { factor: "W_j log argument", value: arg });
    }
    Ok(2.0 * (beta0 - xi) * (eb * mu - al * xi - eb * gp) + al * eb * arg.ln())
}

pub fn w_case(case: PassageCase, beta0: f64, sp: &ScaledParams, mu: f64) -> Result<f64> {
    match case {
        PassageCase::Canard => w_c(beta0, sp, mu),
        PassageCase::Jump => w_j(beta0, sp, mu),
    }
}

/// Closed form of `W_c'(xi)`.
pub fn w_c_prime_at_xi(sp: &ScaledParams, mu: f64) -> f64 {
    let (al, eb, xi) = (sp.alpha, sp.eps_b, sp.xi);
    2.0 / xi * (eb - eb * mu + al * xi) * (al - 2.0 * (mu - 1.0) * xi) / (mu - 1.0)
}

pub fn alpha0_from_beta0(beta0: f64, sp: &ScaledParams, mu: f64, case: PassageCase) -> Result<f64> {
    if !(beta0 < sp.xi) {
        return Err(domain(format!("alpha0 needs beta0 < xi, got {beta0}")));
    }
    let (al, eb, xi) = (sp.alpha, sp.eps_b, sp.xi);
    match case {
        PassageCase::Canard => {
            let w = w_c_aux(beta0, sp)?;
            Ok((beta0 * al + eb * mu - al * xi + w) / (al * eb))
        }
        PassageCase::Jump => {
            let u = check_beta0(beta0, sp)?;
            let d = (xi - beta0) / eb;
            Ok(mu / al - d / (-(-u).exp_m1()))
        }
    }
}

fn exit_for(case: PassageCase, alpha0: f64, beta0: f64, sp: &ScaledParams) -> Result<(f64, f64)> {
    let d = match case {
        PassageCase::Canard => canard_exit(alpha0, beta0, sp)?,
        PassageCase::Jump => jump_exit(alpha0, beta0, sp)?,
    };
    Ok((d.exit.0, d.exit.1))
}

/// Residuals of the four closure equations with `(alpha2, beta2) = (alpha0, beta0)`.
pub fn closure_residuals(case: PassageCase, alpha0: f64, beta0: f64, sp: &ScaledParams, mu: f64) -> Result<[f64; 4]> {
    let s = sp.with_mu(mu);
    let (al, eb, xi) = (s.alpha, s.eps_b, s.xi);
    let b1 = match case {
        PassageCase::Canard => 2.0 * xi - beta0,
        PassageCase::Jump => xi,
    };
    let a1 = alpha0 + (b1 - beta0) / eb;
    let scale = match case {
        PassageCase::Canard => 2.0,
        PassageCase::Jump => 1.0,
    };
    let e = (-scale * al * (xi - beta0) / eb).exp();
    let r1 = a1 - (mu / al + e * (alpha0 - mu / al));
    let (exit_a, exit_b) = exit_for(case, alpha0, beta0, &s)?;
    let r2 = exit_b - b1;
    let lg = (b1 * alpha0 / (a1 * (b1 + eb * (alpha0 - a1)))).ln();
    let r3 = 2.0 * (alpha0 - a1) * (b1 - a1 * eb) - lg;
    let r4 = b1 - (eb * exit_a + beta0 - eb * alpha0);
    Ok([r1, r2, r3, r4])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateOrbit {
    pub case: PassageCase,
    pub mu: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub alpha2: f64,
    pub beta2: f64,
    /// `(a, b)` along the slow drift from `(alpha0, beta0)` to `(alpha1, beta1)`.
    pub slow_segment: Vec<[f64; 2]>,
    /// `(a, b, y)` along the loop, `y` in fast units.
    pub loop_points: Vec<[f64; 3]>,
    pub closure_residual: f64,
}

pub const BETA_FLOOR: f64 = 0.3;
pub const ROOT_GRID: usize = 512;
pub const SLOW_SAMPLES: usize = 400;

/// Sign-change brackets of `f` on a uniform grid over `[lo, hi)`; cells touching a
/// branch error are subdivided up to `depth` times rather than bridged.
fn brackets(f: &dyn Fn(f64) -> Result<f64>, lo: f64, hi: f64, n: usize, depth: u32, out: &mut Vec<(f64, f64)>) {
    let h = (hi - lo) / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| lo + h * i as f64).collect();
    let vs: Vec<Option<f64>> = xs.iter().map(|&x| f(x).ok().filter(|v| v.is_finite())).collect();
    for i in 0..n {
        match (vs[i], vs[i + 1]) {
            (Some(a), Some(b)) => {
                if a == 0.0 {
                    out.push((xs[i], xs[i]));
                } else if a * b < 0.0 {
                    out.push((xs[i], xs[i + 1]));
                }
            }
            (None, None) => {}
            _ if depth > 0 => brackets(f, xs[i], xs[i + 1], 8, depth - 1, out),
            _ => {}
        }
    }
}

/// Roots of `W` on `(beta_floor, xi)`, ascending, with poles filtered out.
pub fn w_roots(case: PassageCase, sp: &ScaledParams, mu: f64, beta_floor: f64, grid: usize) -> Vec<f64> {
    let f = |b: f64| w_case(case, b, sp, mu);
    let hi = sp.xi - (sp.xi - beta_floor) / grid as f64;
    let mut br = Vec::new();
    brackets(&f, beta_floor, hi, grid - 1, 4, &mut br);
    let mut roots: Vec<f64> = br
        .into_iter()
        .filter_map(|(a, b)| {
            if a == b {
                return Some(a);
            }
            let g = |x: f64| f(x).unwrap_or(f64::NAN);
            let mut conv = roots::SimpleConvergency { eps: 1e-14, max_iter: 200 };
            let r = roots::find_root_brent(a, b, g, &mut conv).ok()?;
            // A sign change across a pole is not a root.
            let scale = g(a).abs().min(g(b).abs()).max(1e-12);
            (g(r).abs() <= 1e-6 * scale.max(1.0)).then_some(r)
        })
        .collect();
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    roots
}

/// Candidate orbit for `case` at `mu`; `Ok(None)` when `W` has no root on `(beta_floor, xi)`.
pub fn solve_candidate(case: PassageCase, sp: &ScaledParams, mu: f64) -> Result<Option<CandidateOrbit>> {
    solve_candidate_with(case, sp, mu, BETA_FLOOR, ROOT_GRID)
}

pub fn solve_candidate_with(
    case: PassageCase,
    sp: &ScaledParams,
    mu: f64,
    beta_floor: f64,
    grid: usize,
) -> Result<Option<CandidateOrbit>> {
    let s = sp.with_mu(mu);
    let roots = w_roots(case, &s, mu, beta_floor, grid);
    let Some(&beta0) = roots.last() else { return Ok(None) };
    let alpha0 = alpha0_from_beta0(beta0, &s, mu, case)?;
    if !(2.0 * alpha0 * beta0 < 1.0) {
        return Err(Error::Infeasible { beta0, reason: format!("2 alpha0 beta0 = {} >= 1", 2.0 * alpha0 * beta0) });
    }
    if !(alpha0 > 0.0) {
        return Err(Error::Infeasible { beta0, reason: format!("alpha0 = {alpha0} <= 0") });
    }
    let (alpha1, beta1) = exit_for(case, alpha0, beta0, &s)?;
    if !(2.0 * alpha1 * beta1 > 1.0) {
        return Err(Error::Infeasible { beta0, reason: format!("launch 2 alpha1 beta1 = {} <= 1", 2.0 * alpha1 * beta1) });
    }
    let spec = LoopSpec::new(alpha1, beta1, s.kappa, s.eps_b)?;
    let alpha2 = landing_point(&spec)?;
    let beta2 = crate::loops::invariant_line(&spec, alpha2);
    let s1 = (beta1 - beta0) / s.eps_b;
    let slow_segment = (0..=SLOW_SAMPLES)
        .map(|i| {
            let (a, b) = slow_plane_flow(alpha0, beta0, s1 * i as f64 / SLOW_SAMPLES as f64, &s);
            [a, b]
        })
        .collect();
    let loop_points = loop_polyline(&spec, crate::loops::LOOP_SAMPLES)?;
    let closure_residual = (alpha2 - alpha0).hypot(beta2 - beta0);
    Ok(Some(CandidateOrbit {
        case,
        mu,
        alpha0,
        beta0,
        alpha1,
        beta1,
        alpha2,
        beta2,
        slow_segment,
        loop_points,
        closure_residual,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuWindow {
    pub case: PassageCase,
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub grid_n: usize,
}

/// Maximal runs of grid values of `mu` for which a feasible candidate exists.
pub fn mu_window_scan(case: PassageCase, sp: &ScaledParams, mu_range: (f64, f64), grid_n: usize) -> Result<Vec<MuWindow>> {
    let (lo, hi) = mu_range;
    if !(lo > 0.0 && hi > lo) {
        return Err(domain(format!("invalid mu range ({lo}, {hi})")));
    }
    if grid_n < 16 {
        return Err(domain(format!("grid_n = {grid_n} < 16")));
    }
    let mus: Vec<f64> = (0..grid_n).map(|i| lo + (hi - lo) * i as f64 / (grid_n - 1) as f64).collect();
    let ok: Vec<bool> = mus
        .par_iter()
        .map(|&m| matches!(solve_candidate(case, sp, m), Ok(Some(c)) if c.closure_residual < 1e-8))
        .collect();
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for i in 0..=grid_n {
        let good = i < grid_n && ok[i];
        match (good, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if i - 1 > s {
                    out.push(MuWindow { case, mu_lo: mus[s], mu_hi: mus[i - 1], grid_n });
                }
                start = None;
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Pairwise intersections of two window lists.
pub fn intersect_windows(a: &[MuWindow], b: &[MuWindow]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for x in a {
        for y in b {
            let (lo, hi) = (x.mu_lo.max(y.mu_lo), x.mu_hi.min(y.mu_hi));
            if lo < hi {
                out.push((lo, hi));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp() -> ScaledParams {
        ScaledParams::new(1.3, 0.37, 0.062, 0.05, 0.98, 0.0, 3.93).unwrap()
    }

    #[test]
    fn vanish_at_xi() {
        let s = sp();
        assert!(w_c(s.xi, &s, 1.3).unwrap().abs() < 1e-12);
        assert!(w_j(s.xi, &s, 1.3).unwrap().abs() < 1e-12);
        assert_eq!(w_c_aux(s.xi, &s).unwrap(), -s.eps_b);
    }

    #[test]
    fn series_branches_are_continuous() {
        for u in [0.99e-4, 1.01e-4] {
            assert!((u_coth(u) - u / u.tanh()).abs() < 1e-15);
        }
        for u in [0.99e-6, -0.99e-6, 1.01e-6] {
            assert!((u_over_expm1(u) - u / u.exp_m1()).abs() < 1e-12);
        }
    }

    #[test]
    fn candidate_roots() {
        let s = sp();
        let c = solve_candidate(PassageCase::Canard, &s, 1.3).unwrap().unwrap();
        assert!((c.beta0 - 0.9402).abs() < 1e-3 && (c.alpha0 - 0.1176).abs() < 1e-3);
        assert!(c.closure_residual < 1e-8);
        let j = solve_candidate(PassageCase::Jump, &s, 1.3).unwrap().unwrap();
        assert!((j.beta0 - 0.9023).abs() < 1e-3 && (j.alpha0 - 0.1362).abs() < 1e-3);
        assert!(j.closure_residual < 1e-8);
    }

    #[test]
    fn no_candidate_below_one() {
        let s = sp();
        assert!(solve_candidate(PassageCase::Canard, &s, 0.9).unwrap().is_none());
        assert!(solve_candidate(PassageCase::Jump, &s, 0.9).unwrap().is_none());
    }

    #[test]
    fn closure_equations_hold() {
        let s = sp();
        for case in [PassageCase::Canard, PassageCase::Jump] {
            let c = solve_candidate(case, &s, 1.3).unwrap().unwrap();
            let r = closure_residuals(case, c.alpha0, c.beta0, &s, 1.3).unwrap();
            assert!(r.iter().all(|v| v.abs() < 1e-9), "{case:?} {r:?}");
        }
    }
}
