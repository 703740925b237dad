//! Passage through the line of transcritical points `{b2 = xi, x2 = 0 = y2}`.
//!
//! The center-manifold reduction at a base point `a0` gives a scalar fast
//! equation `x2' = c2 x2^2 + c1(b2) x2 + c0`. With `delta = 0` the axis
//! `{x2 = 0}` is invariant and trajectories show maximal delay (canard); with
//! `delta = K eps^2` they leave near `b2 = xi` (jump).

use nalgebra::{Matrix2, SVector, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::integrate::{Direction, Integrator, IntegratorConfig, OdeSystem, SectionSpec};
use crate::model::{ScaledParams, ScaledSystem};

/// Coefficients of the reduced fast equation at base point `a0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcCoefficients {
    pub a0: f64,
    pub c2: f64,
    /// `c1(b2) = b2 - xi + c1_shift`.
    pub c1_shift: f64,
    pub c0: f64,
}

impl TcCoefficients {
    pub fn c1_at(&self, b2: f64, xi: f64) -> f64 {
        b2 - xi + self.c1_shift
    }

    pub fn reduced_rhs(&self, x2: f64, b2: f64, xi: f64) -> f64 {
        self.c2 * x2 * x2 + self.c1_at(b2, xi) * x2 + self.c0
    }
}

fn check_base(a0: f64, sp: &ScaledParams) -> Result<f64> {
    if 2.0 * a0 * sp.xi == 1.0 {
        return Err(Error::Degenerate(format!("a0 = 1/(2 xi) = {a0}")));
    }
    Ok(1.0 + a0 * sp.xi)
}

/// Reduced coefficients, consistent with [`m2_graph`].
pub fn tc_coefficients(a0: f64, sp: &ScaledParams) -> Result<TcCoefficients> {
    let c = check_base(a0, sp)?;
    let p = 3.0 * a0 * sp.xi;
    let (d, k) = (sp.delta, sp.kappa);
    Ok(TcCoefficients {
        a0,
        c2: (2.0 * a0 * sp.xi - 1.0) / c,
        c1_shift: -2.0 * p * d / (k * c * c),
        c0: d + 2.0 * p * d * d / (k * k * c * c * c),
    })
}

/// Center-manifold graph `y2 = h(x2)` through the transcritical line.
pub fn m2_graph(x2: f64, a0: f64, sp: &ScaledParams) -> f64 {
    let c = 1.0 + a0 * sp.xi;
    let (d, k) = (sp.delta, sp.kappa);
    x2 * x2 / c - 2.0 * d * x2 / (k * c * c) + 2.0 * d * d / (k * k * c * c * c)
}

/// The graph with the coefficients as printed in the source analysis; kept for comparison.
pub fn m2_graph_printed(x2: f64, a0: f64, sp: &ScaledParams) -> f64 {
    let c = 1.0 + a0 * sp.xi;
    let (d, k) = (sp.delta, sp.kappa);
    x2 * x2 / c - d * x2 / (k * c * c) + d * d / (k * k * c * c * c)
}

/// Invariance defect of a graph `y2 = h(x2)` for the fast subsystem at `(a0, b2)`.
pub fn m2_residual(x2: f64, b2: f64, a0: f64, sp: &ScaledParams, h: impl Fn(f64) -> f64) -> f64 {
    let y2 = h(x2);
    let dx = 1e-6 * x2.abs().max(1e-6);
    let hp = (h(x2 + dx) - h(x2 - dx)) / (2.0 * dx);
    let q = a0 * b2;
    let fx = 3.0 * q * y2 - x2 * x2 + (b2 - sp.xi) * x2 + sp.delta;
    let fy = sp.kappa * (x2 * x2 - y2 - q * y2);
    fy - hp * fx
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcGenericity {
    pub f: f64,
    pub f_x: f64,
    pub f_b: f64,
    pub det_hessian: f64,
    pub f_xx: f64,
    /// `[f = 0, f_x = 0, f_b = 0, det < 0, f_xx != 0]`.
    pub holds: [bool; 5],
}

impl TcGenericity {
    pub fn all(&self) -> bool {
        self.holds.iter().all(|&b| b)
    }
}

/// Reduced fast field in `(x2, b~ = b2/eps_b, eps^ = eps^2)` at fixed `delta^`.
fn reduced_f(x: f64, bt: f64, eh: f64, a0: f64, sp: &ScaledParams, delta_hat: f64) -> f64 {
    let c = 1.0 + a0 * sp.xi;
    let p = 3.0 * a0 * sp.xi;
    let d = eh * delta_hat;
    let k = sp.kappa;
    (2.0 * a0 * sp.xi - 1.0) / c * x * x
        + (-2.0 * p * d / (k * c * c) + sp.eps_b * bt - sp.xi) * x
        + d
        + 2.0 * p * d * d / (k * k * c * c * c)
}

/// Genericity conditions for the planar transcritical point, by central differences.
pub fn check_tc_genericity(a0: f64, sp: &ScaledParams) -> Result<TcGenericity> {
    if !(2.0 * a0 * sp.xi > 1.0) {
        return Err(domain(format!("genericity check needs a0 > 1/(2 xi), got {a0}")));
    }
    let dh = sp.delta_hat();
    let f = |x: f64, b: f64| reduced_f(x, b, 0.0, a0, sp, dh);
    let (x0, b0) = (0.0, sp.xi / sp.eps_b);
    let h = 1e-4;
    let f0 = f(x0, b0);
    let f_x = (f(x0 + h, b0) - f(x0 - h, b0)) / (2.0 * h);
    let f_b = (f(x0, b0 + h) - f(x0, b0 - h)) / (2.0 * h);
    let f_xx = (f(x0 + h, b0) - 2.0 * f0 + f(x0 - h, b0)) / (h * h);
    let f_bb = (f(x0, b0 + h) - 2.0 * f0 + f(x0, b0 - h)) / (h * h);
    let f_xb = (f(x0 + h, b0 + h) - f(x0 + h, b0 - h) - f(x0 - h, b0 + h) + f(x0 - h, b0 - h)) / (4.0 * h * h);
    let det = Matrix2::new(f_xx, f_xb, f_xb, f_bb).determinant();
    let tol = 1e-9;
    Ok(TcGenericity {
        f: f0,
        f_x,
        f_b,
        det_hessian: det,
        f_xx,
        holds: [f0.abs() < tol, f_x.abs() < tol, f_b.abs() < tol, det < 0.0, f_xx.abs() > tol],
    })
}

/// `lambda_tc = 1 + (delta^/(2 eps_b)) (2 a0 xi - 1)/(1 + a0 xi)`.
pub fn lambda_tc(a0: f64, sp: &ScaledParams, delta_hat: f64) -> Result<f64> {
    if !(delta_hat >= 0.0) {
        return Err(domain(format!("delta_hat must be nonnegative, got {delta_hat}")));
    }
    if !(2.0 * a0 * sp.xi > 1.0) {
        return Err(domain(format!("lambda_tc needs a0 > 1/(2 xi), got {a0}")));
    }
    let c2 = (2.0 * a0 * sp.xi - 1.0) / (1.0 + a0 * sp.xi);
    Ok(1.0 + delta_hat / (2.0 * sp.eps_b) * c2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PassageCase {
    Canard,
    Jump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcClassification {
    pub case: PassageCase,
    pub lambda_tc: f64,
    pub delta_hat: f64,
}

/// Declared dependence of `delta` on `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DeltaScaling {
    Zero,
    /// `delta = eps^2 exp(-k1/eps^2)`.
    ExponentiallySmall { k1: f64 },
    /// `delta = k2 eps^2`.
    Quadratic { k2: f64 },
}

impl DeltaScaling {
    pub fn delta(&self, eps: f64) -> f64 {
        let e2 = eps * eps;
        match *self {
            DeltaScaling::Zero => 0.0,
            DeltaScaling::ExponentiallySmall { k1 } => e2 * (-k1 / e2).exp(),
            DeltaScaling::Quadratic { k2 } => k2 * e2,
        }
    }
}

pub const DELTA_HAT_MAX: f64 = 10.0;

/// Canard if `delta < eps^2 exp(-1/(2 eps^2))`, jump otherwise; uses `sp.delta`.
pub fn classify_passage(a0: f64, sp: &ScaledParams) -> Result<TcClassification> {
    let e2 = sp.eps2();
    let dh = sp.delta / e2;
    if dh > DELTA_HAT_MAX {
        return Err(domain(format!("delta/eps^2 = {dh} exceeds {DELTA_HAT_MAX}; outside the analysed regime")));
    }
    let lam = lambda_tc(a0, sp, dh)?;
    let exp_small = sp.delta < e2 * (-1.0 / (2.0 * e2)).exp();
    let case = if exp_small { PassageCase::Canard } else { PassageCase::Jump };
    Ok(TcClassification { case, lambda_tc: lam, delta_hat: dh })
}

/// Linearization of the fast subsystem along `{x2 = 0 = y2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FastLinearization {
    pub lambda1: f64,
    pub lambda2: f64,
    pub v1: (f64, f64),
    pub v2: (f64, f64),
    /// `0 >= lambda1 > lambda2`.
    pub e1: bool,
    /// `0 < lambda1 < |lambda2|`.
    pub e2: bool,
}

pub fn fast_linearization_matrix(a2: f64, b2: f64, sp: &ScaledParams) -> Matrix2<f64> {
    let q = a2 * b2;
    Matrix2::new(b2 - sp.xi, 3.0 * q, 0.0, -(1.0 + q))
}

pub fn fast_linearization(a2: f64, b2: f64, sp: &ScaledParams) -> Result<FastLinearization> {
    let q = a2 * b2;
    let den = 1.0 + b2 + q - sp.xi;
    if den == 0.0 {
        return Err(Error::Degenerate(format!("1 + b2 + a2 b2 - xi = 0 at ({a2}, {b2})")));
    }
    let l1 = b2 - sp.xi;
    let l2 = -(1.0 + q);
    Ok(FastLinearization {
        lambda1: l1,
        lambda2: l2,
        v1: (1.0, 0.0),
        v2: (-3.0 * q / den, 1.0),
        e1: 0.0 >= l1 && l1 > l2,
        e2: 0.0 < l1 && l1 < l2.abs(),
    })
}

/// Slow flow on `{x2 = 0 = y2}`: `a' = mu - alpha a`, `b' = eps_b`.
pub fn slow_plane_flow(a0: f64, b0: f64, ds: f64, sp: &ScaledParams) -> (f64, f64) {
    let eq = sp.mu / sp.alpha;
    (eq + (-sp.alpha * ds).exp() * (a0 - eq), b0 + sp.eps_b * ds)
}

/// Way-in/way-out function `Pi(s) = eps_b (s - s0)^2/2 + (beta0 - xi)(s - s0)`.
pub fn pi_wiwo(s: f64, s0: f64, beta0: f64, sp: &ScaledParams) -> f64 {
    let d = s - s0;
    sp.eps_b * d * d / 2.0 + (beta0 - sp.xi) * d
}

pub fn pi_root(s0: f64, beta0: f64, sp: &ScaledParams) -> Result<f64> {
    if beta0 >= sp.xi {
        return Err(domain(format!("no delay for beta0 = {beta0} >= xi")));
    }
    Ok(s0 + 2.0 * (sp.xi - beta0) / sp.eps_b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayResult {
    pub entry: (f64, f64),
    /// `(a2, b2, y2)` at departure.
    pub exit: (f64, f64, f64),
    /// Departure time with the entry at `s = 0`.
    pub s1: f64,
    pub case: PassageCase,
}

fn check_entry(alpha0: f64, beta0: f64, sp: &ScaledParams) -> Result<()> {
    if !(beta0 < sp.xi) {
        return Err(domain(format!("entry needs beta0 < xi, got {beta0}")));
    }
    if !(2.0 * alpha0 * beta0 < 1.0) {
        return Err(domain(format!("entry needs 2 alpha0 beta0 < 1, got {}", 2.0 * alpha0 * beta0)));
    }
    Ok(())
}

pub fn canard_exit(alpha0: f64, beta0: f64, sp: &ScaledParams) -> Result<DelayResult> {
    check_entry(alpha0, beta0, sp)?;
    let s1 = pi_root(0.0, beta0, sp)?;
    let (a, b) = slow_plane_flow(alpha0, beta0, s1, sp);
    Ok(DelayResult { entry: (alpha0, beta0), exit: (a, b, 0.0), s1, case: PassageCase::Canard })
}

pub fn jump_exit(alpha0: f64, beta0: f64, sp: &ScaledParams) -> Result<DelayResult> {
    check_entry(alpha0, beta0, sp)?;
    let s1 = (sp.xi - beta0) / sp.eps_b;
    let (a, _) = slow_plane_flow(alpha0, beta0, s1, sp);
    Ok(DelayResult { entry: (alpha0, beta0), exit: (a, sp.xi, 0.0), s1, case: PassageCase::Jump })
}

/// Slow flow on `{x2 = 0 = y2}` augmented by `Pi' = b2 - xi`, for quadrature checks.
pub struct PlaneWithPi(pub ScaledParams);

impl OdeSystem<3> for PlaneWithPi {
    fn rhs(&self, y: &SVector<f64, 3>) -> SVector<f64, 3> {
        let sp = &self.0;
        SVector::<f64, 3>::new(sp.mu - sp.alpha * y[0], sp.eps_b, y[1] - sp.xi)
    }
}

/// Where a full-system trajectory leaves a neighbourhood of `{x2 = 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayObservation {
    pub eps: f64,
    pub delta: f64,
    pub exit_a: f64,
    pub exit_b: f64,
    pub exit_s: f64,
}

/// Integrate the scaled system from `(a0, b0, x0, y0)` until `x2` first rises through `threshold`.
pub fn observe_exit(
    sp: &ScaledParams,
    start: Vector4<f64>,
    threshold: f64,
    horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<DelayObservation> {
    let sys = ScaledSystem(*sp);
    let mut cfg = cfg.clone();
    cfg.dense_output = false;
    let sec = SectionSpec::coordinate(2, threshold, Direction::Rising);
    let out = Integrator::new(&sys, &cfg).run(start, 0.0, horizon, std::slice::from_ref(&sec))?;
    let c = out.terminal.ok_or(Error::NoCrossing { horizon })?;
    Ok(DelayObservation { eps: sp.eps, delta: sp.delta, exit_a: c.state[0], exit_b: c.state[1], exit_s: c.t })
}

/// Residual-scaling slope: least-squares slope of `log|R(r)|` against `log r`.
pub fn loglog_slope(radii: &[f64], residuals: &[f64]) -> f64 {
    let n = radii.len() as f64;
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = residuals.iter().map(|r| r.abs().ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Residual of the `M2` graph along the ray `(x2, b2 - xi, delta) = r * dir`.
pub fn m2_residual_on_ray(r: f64, dir: Vector2<f64>, delta_dir: f64, a0: f64, sp: &ScaledParams, printed: bool) -> f64 {
    let s = sp.with_delta(r * delta_dir);
    let b2 = sp.xi + r * dir[1];
    let x2 = r * dir[0];
    if printed {
        m2_residual(x2, b2, a0, &s, |x| m2_graph_printed(x, a0, &s))
    } else {
        m2_residual(x2, b2, a0, &s, |x| m2_graph(x, a0, &s))
    }
}
