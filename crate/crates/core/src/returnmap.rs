//! Global return map near a candidate orbit.
//!
//! Sections, in scaled coordinates:
//! * `Sigma0 = {a2 = alpha0 + rho}` crossed with `a2` increasing, near `(alpha0, beta0)`,
//!   with the box `x, y in [0, rho]` taken in fast coordinates `x = eps x2`, `y = eps^2 y2`;
//! * `Sigma1 = {x2 = k}` crossed with `x2` increasing (departure into the loop);
//! * `Sigma2 = {x2 = k}` crossed with `x2` decreasing (landing after the loop).
//!
//! The return `Sigma0 -> Sigma1 -> Sigma2 -> Sigma0` is computed on the full stiff
//! system. Fixed points are found by damped iteration followed by Newton steps
//! with a finite-difference Jacobian. When the orbit does not reach back below
//! `a2 = alpha0 + rho` (large `eps`), the map `Sigma2 -> Sigma2` is used instead.

use nalgebra::{Matrix3, Vector3, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidates::{solve_candidate, CandidateOrbit};
use crate::error::{domain, Error, Result};
use crate::integrate::{Direction, Integrator, IntegratorConfig, SectionSpec};
use crate::manifolds::{branch_expansions, ExclusionBall, DEFAULT_UPSILON};
use crate::model::{ScaledParams, ScaledSystem};
use crate::transcritical::PassageCase;

fn slow_map(a: f64, b: f64, sp: &ScaledParams, factor: f64) -> Result<f64> {
    if !(2.0 * a * b < 1.0 && b < sp.xi) {
        return Err(domain(format!("slow map needs 2ab < 1 and b < xi, got ({a}, {b})")));
    }
    let eq = sp.mu / sp.alpha;
    Ok(eq + (-factor * sp.alpha / sp.eps_b * (sp.xi - b)).exp() * (a - eq))
}

/// Slow flow map with maximal delay.
pub fn phi_c(a: f64, b: f64, sp: &ScaledParams) -> Result<(f64, f64)> {
    Ok((slow_map(a, b, sp, 2.0)?, 2.0 * sp.xi - b))
}

/// Slow flow map up to `b2 = xi`.
pub fn phi_j(a: f64, b: f64, sp: &ScaledParams) -> Result<(f64, f64)> {
    Ok((slow_map(a, b, sp, 1.0)?, sp.xi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub name: String,
    /// Positive when the inequality holds.
    pub margin: f64,
    /// First-order coefficient: `margin = slope * rho + O(rho^2)` at a closed candidate.
    pub slope: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaRow {
    pub rho: f64,
    pub checks: Vec<LemmaCheck>,
}

impl LemmaRow {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    /// Largest relative deviation of `margin/rho` from the first-order slope.
    pub fn linear_deviation(&self) -> f64 {
        self.checks.iter().map(|c| (c.margin / self.rho - c.slope).abs() / c.slope.abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub case: PassageCase,
    pub alpha0: f64,
    pub beta0: f64,
    pub rows: Vec<LemmaRow>,
    pub largest_rho_all_hold: Option<f64>,
}

fn check(name: &'static str, margin: f64, slope: f64) -> LemmaCheck {
    LemmaCheck { name: name.to_string(), margin, slope, holds: margin > 0.0 }
}

/// Ordering inequalities for the slow maps near the candidate corner.
pub fn lemma_checks(sp: &ScaledParams, mu: f64, case: PassageCase, rho_grid: &[f64]) -> Result<LemmaReport> {
    let s = sp.with_mu(mu);
    let c = solve_candidate(case, &s, mu)?.ok_or_else(|| domain(format!("no candidate at mu = {mu}")))?;
    lemma_checks_at(&s, case, c.alpha0, c.beta0, rho_grid)
}

pub fn lemma_checks_at(s: &ScaledParams, case: PassageCase, a0: f64, b0: f64, rho_grid: &[f64]) -> Result<LemmaReport> {
    let eb = s.eps_b;
    let mut rows = Vec::with_capacity(rho_grid.len());
    for &rho in rho_grid {
        if !(rho > 0.0) {
            return Err(domain(format!("rho must be positive, got {rho}")));
        }
        let amp = a0 - s.mu / s.alpha;
        let checks = match case {
            PassageCase::Canard => {
                let e = (-2.0 * s.alpha * (s.xi - b0) / eb).exp();
                let m = 2.0 + 2.0 * s.alpha * e * amp;
                let (_, b1) = phi_c(a0, b0, s)?;
                let (a_lo, b_lo) = phi_c(a0, b0 - rho, s)?;
                let (a_hi, b_hi) = phi_c(a0, b0 + rho, s)?;
                vec![
                    check("lower image above", b_lo - b1, 1.0),
                    check("upper image below", b1 - b_hi, 1.0),
                    check("lower image above its line", b_lo - (eb * a_lo + b0 - rho - eb * a0), m),
                    check("upper image below its line", (eb * a_hi + b0 + rho - eb * a0) - b_hi, m),
                ]
            }
            PassageCase::Jump => {
                let e = (-s.alpha * (s.xi - b0) / eb).exp();
                let m = (1.0 + s.alpha * e * amp) / eb;
                let (a_lo, _) = phi_j(a0, b0 - rho, s)?;
                let (a_hi, _) = phi_j(a0, b0 + rho, s)?;
                vec![
                    check("lower image left of its line", (s.xi - b0 + rho + eb * a0) / eb - a_lo, m),
                    check("upper image right of its line", a_hi - (s.xi - b0 - rho + eb * a0) / eb, m),
                ]
            }
        };
        rows.push(LemmaRow { rho, checks });
    }
    let largest = rows.iter().filter(|r| r.all_hold()).map(|r| r.rho).fold(None, |m: Option<f64>, r| Some(m.map_or(r, |v| v.max(r))));
    Ok(LemmaReport { case, alpha0: a0, beta0: b0, rows, largest_rho_all_hold: largest })
}

pub const DEFAULT_RHO: f64 = 0.02;
pub const DEFAULT_K: f64 = 1.0;
pub const LEG_HORIZON: f64 = 50.0;
pub const LIFT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionFrame {
    pub rho: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub k: f64,
}

impl SectionFrame {
    pub fn new(rho: f64, alpha0: f64, beta0: f64, k: f64, ball: &ExclusionBall) -> Result<Self> {
        if !(rho > 0.0 && k > 0.0) {
            return Err(domain(format!("rho and k must be positive, got {rho}, {k}")));
        }
        for b in [beta0 - rho, beta0, beta0 + rho] {
            if ball.contains(alpha0 + rho, b) {
                return Err(domain(format!("Sigma0 meets the exclusion ball at b2 = {b}")));
            }
        }
        Ok(Self { rho, alpha0, beta0, k })
    }

    pub fn sigma0_a(&self) -> f64 {
        self.alpha0 + self.rho
    }

    pub fn in_sigma0_box(&self, b2: f64) -> bool {
        (b2 - self.beta0).abs() <= self.rho
    }

    /// Point of `Sigma0` at height `b2` on the attracting branch. `x2` is floored
    /// at [`LIFT_FLOOR`] since `{x2 = 0 = y2}` is invariant when `delta = 0`.
    pub fn lift(&self, b2: f64, sp: &ScaledParams) -> Result<Vector4<f64>> {
        let a = self.sigma0_a();
        let (x, _) = branch_expansions(a, b2, sp.delta, sp)?.attracting;
        let x = x.max(LIFT_FLOOR);
        Ok(Vector4::new(a, b2, x, x * x / (1.0 + a * b2)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SectionKind {
    Sigma0,
    Sigma2,
}

impl SectionKind {
    /// Coordinates on the section: `(b2, x2, y2)` on `Sigma0`, `(a2, b2, y2)` on `Sigma2`.
    pub fn coords(&self, s: &Vector4<f64>) -> Vector3<f64> {
        match self {
            SectionKind::Sigma0 => Vector3::new(s[1], s[2], s[3]),
            SectionKind::Sigma2 => Vector3::new(s[0], s[1], s[3]),
        }
    }

    pub fn state(&self, z: &Vector3<f64>, frame: &SectionFrame) -> Vector4<f64> {
        match self {
            SectionKind::Sigma0 => Vector4::new(frame.sigma0_a(), z[0], z[1], z[2]),
            SectionKind::Sigma2 => Vector4::new(z[0], z[1], frame.k, z[2]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegCrossing {
    pub t: f64,
    pub state: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnOutcome {
    pub state: [f64; 4],
    pub time: f64,
    /// Crossings in the order visited, ending with the return.
    pub legs: Vec<LegCrossing>,
}

fn leg(
    sys: &ScaledSystem,
    cfg: &IntegratorConfig,
    start: Vector4<f64>,
    target: SectionSpec<'_, 4>,
    guard: Option<SectionSpec<'_, 4>>,
    name: &'static str,
) -> Result<(Vector4<f64>, f64)> {
    let mut secs = vec![target];
    if let Some(g) = guard {
        secs.push(g);
    }
    let out = Integrator::new(sys, cfg)
        .run(start, 0.0, LEG_HORIZON, &secs)
        .map_err(|e| Error::Escape { leg: name, source: Box::new(e) })?;
    match out.terminal {
        Some(c) if c.section == 0 => Ok((c.state, c.t)),
        Some(c) => Err(Error::Escape { leg: name, source: Box::new(Error::NoCrossing { horizon: c.t }) }),
        None => Err(Error::Escape { leg: name, source: Box::new(Error::NoCrossing { horizon: LEG_HORIZON }) }),
    }
}

fn leg_cfg(cfg: &IntegratorConfig) -> IntegratorConfig {
    let mut c = cfg.clone();
    c.dense_output = false;
    if !c.clamp_nonneg.contains(&2) {
        c.clamp_nonneg.extend([2, 3]);
    }
    c
}

fn return_from(
    kind: SectionKind,
    start: Vector4<f64>,
    sp: &ScaledParams,
    frame: &SectionFrame,
    cfg: &IntegratorConfig,
) -> Result<ReturnOutcome> {
    let sys = ScaledSystem(*sp);
    let cfg = leg_cfg(cfg);
    let k = frame.k;
    let a_sec = frame.sigma0_a();
    let up = || SectionSpec::coordinate(2, k, Direction::Rising);
    let down = || SectionSpec::coordinate(2, k, Direction::Falling);
    let mut legs = Vec::with_capacity(3);
    let mut total = 0.0;
    let mut push = |s: Vector4<f64>, t: f64, legs: &mut Vec<LegCrossing>| {
        total += t;
        legs.push(LegCrossing { t: total, state: [s[0], s[1], s[2], s[3]] });
    };
    let (s1, t1) = leg(&sys, &cfg, start, up(), None, "to Sigma1")?;
    push(s1, t1, &mut legs);
    let (s2, t2) = leg(&sys, &cfg, s1, down(), None, "Sigma1 to Sigma2")?;
    push(s2, t2, &mut legs);
    let end = match kind {
        SectionKind::Sigma0 => {
            let (s0, t0) = leg(
                &sys,
                &cfg,
                s2,
                SectionSpec::coordinate(0, a_sec, Direction::Rising),
                Some(up()),
                "Sigma2 to Sigma0",
            )?;
            push(s0, t0, &mut legs);
            s0
        }
        SectionKind::Sigma2 => s2,
    };
    Ok(ReturnOutcome { state: [end[0], end[1], end[2], end[3]], time: total, legs })
}

/// Flow from a `Sigma2` state to `Sigma0`, failing if the orbit departs again first.
pub fn sigma2_to_sigma0(
    state: Vector4<f64>,
    sp: &ScaledParams,
    frame: &SectionFrame,
    cfg: &IntegratorConfig,
) -> Result<Vector4<f64>> {
    let sys = ScaledSystem(*sp);
    let cfg = leg_cfg(cfg);
    let target = SectionSpec::coordinate(0, frame.sigma0_a(), Direction::Rising);
    let guard = SectionSpec::coordinate(2, frame.k, Direction::Rising);
    Ok(leg(&sys, &cfg, state, target, Some(guard), "Sigma2 to Sigma0")?.0)
}

/// One return `Sigma0 -> Sigma1 -> Sigma2 -> Sigma0` of the full scaled system.
pub fn poincare_return(
    state: Vector4<f64>,
    sp: &ScaledParams,
    frame: &SectionFrame,
    cfg: &IntegratorConfig,
) -> Result<ReturnOutcome> {
    if (state[0] - frame.sigma0_a()).abs() > 1e-12 || !frame.in_sigma0_box(state[1]) {
        return Err(domain(format!("start ({}, {}) is not on Sigma0", state[0], state[1])));
    }
    let (x, y) = (sp.eps * state[2], sp.eps2() * state[3]);
    if !(x >= 0.0 && y >= 0.0 && x <= frame.rho && y <= frame.rho) {
        return Err(domain(format!("start (x, y) = ({x}, {y}) outside [0, rho]^2")));
    }
    return_from(SectionKind::Sigma0, state, sp, frame, cfg)
}

/// One return `Sigma2 -> Sigma1 -> Sigma2`.
pub fn sigma2_return(
    state: Vector4<f64>,
    sp: &ScaledParams,
    frame: &SectionFrame,
    cfg: &IntegratorConfig,
) -> Result<ReturnOutcome> {
    return_from(SectionKind::Sigma2, state, sp, frame, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitOptions {
    pub rho: f64,
    pub k: f64,
    /// `delta/eps^2` used for the jump case; the canard case uses `delta = 0`.
    pub jump_delta_hat: f64,
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub damped_warmup: usize,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        Self { rho: DEFAULT_RHO, k: DEFAULT_K, jump_delta_hat: 2.0, damping: 0.7, tol: 1e-8, max_iter: 200, damped_warmup: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnMapResult {
    pub case: PassageCase,
    pub eps: f64,
    pub delta: f64,
    pub section: SectionKind,
    pub fixed_point: [f64; 4],
    /// Section coordinates of the fixed point.
    pub coords: [f64; 3],
    /// Period on the slow time `s`.
    pub period: f64,
    pub jacobian: [[f64; 3]; 3],
    pub multiplier_moduli: [f64; 3],
    pub residual: f64,
    pub iterations: usize,
    pub hausdorff_to_candidate: f64,
    pub a2_min: f64,
    /// `b2` where the orbit first rises through `x2 = k` after the fixed point.
    pub departure_b2: f64,
}

impl ReturnMapResult {
    pub fn period_tau(&self) -> f64 {
        self.period / (self.eps * self.eps)
    }

    pub fn is_stable(&self) -> bool {
        self.multiplier_moduli.iter().all(|&m| m < 1.0)
    }
}

type SectionMap<'a> = dyn Fn(&Vector3<f64>) -> Result<(Vector3<f64>, f64)> + Sync + 'a;

fn fd_jacobian3(map: &SectionMap<'_>, z: &Vector3<f64>, pz: &Vector3<f64>, step: f64) -> Result<Matrix3<f64>> {
    let cols: Vec<Result<Vector3<f64>>> = (0..3)
        .into_par_iter()
        .map(|j| {
            let mut zp = *z;
            zp[j] += step;
            Ok((map(&zp)?.0 - pz) / step)
        })
        .collect();
    let mut m = Matrix3::zeros();
    for (j, c) in cols.into_iter().enumerate() {
        m.set_column(j, &c?);
    }
    Ok(m)
}

struct FixedPoint {
    z: Vector3<f64>,
    period: f64,
    residual: f64,
    iterations: usize,
}

fn solve_fixed(map: &SectionMap<'_>, z0: Vector3<f64>, opts: &OrbitOptions, step: f64) -> Result<FixedPoint> {
    let mut trace: Vec<[f64; 3]> = vec![[z0[0], z0[1], z0[2]]];
    let mut z = z0;
    let mut it = 0;
    let mut newton = true;
    loop {
        let (pz, period) = map(&z)?;
        let r = pz - z;
        let res = r.amax();
        if res < opts.tol {
            return Ok(FixedPoint { z, period, residual: res, iterations: it });
        }
        if it >= opts.max_iter {
            return Err(Error::NoOrbit { iterations: it, residual: res, trace });
        }
        it += 1;
        let damped = z + opts.damping * r;
        z = if newton && it > opts.damped_warmup {
            let j = fd_jacobian3(map, &z, &pz, step)?;
            match (Matrix3::identity() - j).lu().solve(&r) {
                Some(dz) if dz.iter().all(|v| v.is_finite()) && dz.amax() < 10.0 * res.max(1e-3) => z + dz,
                _ => {
                    newton = false;
                    damped
                }
            }
        } else {
            damped
        };
        trace.push([z[0], z[1], z[2]]);
    }
}

/// Candidate polyline in `(a, b, x, y)` fast coordinates.
pub fn candidate_polyline(c: &CandidateOrbit) -> Vec<[f64; 4]> {
    let mut p: Vec<[f64; 4]> = c.slow_segment.iter().map(|q| [q[0], q[1], 0.0, 0.0]).collect();
    p.extend(c.loop_points.iter().map(|q| [q[0], q[1], (3.0 * q[0] * q[1] * q[2]).max(0.0).sqrt(), q[2]]));
    p
}

/// Fast coordinates `(a2, b2, eps x2, eps^2 y2)` of a scaled state.
pub fn to_fast_coords(s: &Vector4<f64>, eps: f64) -> [f64; 4] {
    [s[0], s[1], eps * s[2], eps * eps * s[3]]
}

fn point_segment_dist2(p: &[f64; 4], a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let mut ab2 = 0.0;
    let mut ap_ab = 0.0;
    for i in 0..4 {
        let d = b[i] - a[i];
        ab2 += d * d;
        ap_ab += (p[i] - a[i]) * d;
    }
    let t = if ab2 > 0.0 { (ap_ab / ab2).clamp(0.0, 1.0) } else { 0.0 };
    (0..4).map(|i| (p[i] - a[i] - t * (b[i] - a[i])).powi(2)).sum()
}

fn directed(a: &[[f64; 4]], b: &[[f64; 4]]) -> f64 {
    a.par_iter()
        .map(|p| {
            if b.len() == 1 {
                return point_segment_dist2(p, &b[0], &b[0]);
            }
            b.windows(2).map(|w| point_segment_dist2(p, &w[0], &w[1])).fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
        .sqrt()
}

/// Symmetric Hausdorff distance between two polylines, points measured to segments.
pub fn hausdorff_distance(a: &[[f64; 4]], b: &[[f64; 4]]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(domain("Hausdorff distance of an empty polyline"));
    }
    Ok(directed(a, b).max(directed(b, a)))
}

/// Orbit through a section state over one period, in scaled coordinates.
pub fn orbit_polyline(start: Vector4<f64>, period: f64, sp: &ScaledParams, cfg: &IntegratorConfig) -> Result<Vec<Vector4<f64>>> {
    let sys = ScaledSystem(*sp);
    let mut c = leg_cfg(cfg);
    c.dense_output = true;
    let out = Integrator::new(&sys, &c).run(start, 0.0, period, &[])?;
    Ok(out.trajectory.states)
}

pub fn case_params(sp: &ScaledParams, mu: f64, case: PassageCase, eps: f64, opts: &OrbitOptions) -> ScaledParams {
    let delta = match case {
        PassageCase::Canard => 0.0,
        PassageCase::Jump => opts.jump_delta_hat * eps * eps,
    };
    sp.with_mu(mu).with_eps(eps).with_delta(delta)
}

/// Stable periodic orbit near the candidate for `case` at `(mu, eps)`.
pub fn find_periodic_orbit(
    sp: &ScaledParams,
    mu: f64,
    case: PassageCase,
    eps: f64,
    cfg: &IntegratorConfig,
    opts: &OrbitOptions,
) -> Result<ReturnMapResult> {
    let s = case_params(sp, mu, case, eps, opts);
    s.validate()?;
    let cand = solve_candidate(case, &s, mu)?.ok_or_else(|| domain(format!("no {case:?} candidate at mu = {mu}")))?;
    let ball = ExclusionBall::new(s.xi, DEFAULT_UPSILON)?;
    let frame = SectionFrame::new(opts.rho, cand.alpha0, cand.beta0, opts.k, &ball)?;
    let step = (1e-6f64).max(10.0 * eps * cfg.atol);

    let start = frame.lift(cand.beta0, &s)?;
    let try_sigma0 = || -> Result<(FixedPoint, SectionKind)> {
        let map = |z: &Vector3<f64>| -> Result<(Vector3<f64>, f64)> {
            let st = SectionKind::Sigma0.state(z, &frame);
            let o = return_from(SectionKind::Sigma0, st, &s, &frame, cfg)?;
            Ok((SectionKind::Sigma0.coords(&Vector4::from(o.state)), o.time))
        };
        Ok((solve_fixed(&map, SectionKind::Sigma0.coords(&start), opts, step)?, SectionKind::Sigma0))
    };
    let (fp, kind) = match try_sigma0() {
        Ok(v) => v,
        Err(Error::Escape { leg: "Sigma2 to Sigma0", .. }) => {
            let first = sigma2_return(start, &s, &frame, cfg)?;
            let z0 = SectionKind::Sigma2.coords(&Vector4::from(first.state));
            let map = |z: &Vector3<f64>| -> Result<(Vector3<f64>, f64)> {
                let st = SectionKind::Sigma2.state(z, &frame);
                let o = return_from(SectionKind::Sigma2, st, &s, &frame, cfg)?;
                Ok((SectionKind::Sigma2.coords(&Vector4::from(o.state)), o.time))
            };
            let fp2 = solve_fixed(&map, z0, opts, step)?;
            // Re-anchor on Sigma0 when the attractor reaches it.
            match sigma2_to_sigma0(SectionKind::Sigma2.state(&fp2.z, &frame), &s, &frame, cfg) {
                Ok(s0) => {
                    let map0 = |z: &Vector3<f64>| -> Result<(Vector3<f64>, f64)> {
                        let st = SectionKind::Sigma0.state(z, &frame);
                        let o = return_from(SectionKind::Sigma0, st, &s, &frame, cfg)?;
                        Ok((SectionKind::Sigma0.coords(&Vector4::from(o.state)), o.time))
                    };
                    match solve_fixed(&map0, SectionKind::Sigma0.coords(&s0), opts, step) {
                        Ok(fp0) => (fp0, SectionKind::Sigma0),
                        Err(_) => (fp2, SectionKind::Sigma2),
                    }
                }
                Err(_) => (fp2, SectionKind::Sigma2),
            }
        }
        Err(e) => return Err(e),
    };

    let map = |z: &Vector3<f64>| -> Result<(Vector3<f64>, f64)> {
        let st = kind.state(z, &frame);
        let o = return_from(kind, st, &s, &frame, cfg)?;
        Ok((kind.coords(&Vector4::from(o.state)), o.time))
    };
    let (pz, _) = map(&fp.z)?;
    let jac = fd_jacobian3(&map, &fp.z, &pz, step)?;
    let eig = jac.complex_eigenvalues();
    let moduli = [eig[0].norm(), eig[1].norm(), eig[2].norm()];

    let x0 = kind.state(&fp.z, &frame);
    let orbit = orbit_polyline(x0, fp.period, &s, cfg)?;
    let a2_min = orbit.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
    let departure_b2 = orbit.windows(2).find(|w| w[0][2] < frame.k && w[1][2] >= frame.k).map_or(f64::NAN, |w| w[1][1]);
    let fast: Vec<[f64; 4]> = orbit.iter().map(|v| to_fast_coords(v, eps)).collect();
    let d_h = hausdorff_distance(&fast, &candidate_polyline(&cand))?;

    let mut jm = [[0.0; 3]; 3];
    for (i, row) in jm.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = jac[(i, j)];
        }
    }
    Ok(ReturnMapResult {
        case,
        eps,
        delta: s.delta,
        section: kind,
        fixed_point: [x0[0], x0[1], x0[2], x0[3]],
        coords: [fp.z[0], fp.z[1], fp.z[2]],
        period: fp.period,
        jacobian: jm,
        multiplier_moduli: moduli,
        residual: fp.residual,
        iterations: fp.iterations,
        hausdorff_to_candidate: d_h,
        a2_min,
        departure_b2,
    })
}

/// `find_periodic_orbit` over a list of `eps`, in parallel; order follows `eps_list`.
pub fn epsilon_sweep(
    sp: &ScaledParams,
    mu: f64,
    case: PassageCase,
    eps_list: &[f64],
    cfg: &IntegratorConfig,
    opts: &OrbitOptions,
) -> Vec<Result<ReturnMapResult>> {
    eps_list.par_iter().map(|&e| find_periodic_orbit(sp, mu, case, e, cfg, opts)).collect()
}

/// True when the sequence is strictly decreasing.
pub fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}
