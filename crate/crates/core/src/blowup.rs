//! Blow-up of the fold set `L0`.
//!
//! Chart 1 (`x = r1`, `y = r1^2 y1`, `eps = r1 eps1`) covers the entry and exit
//! of the fold region; chart 2 is the rescaling `x = eps x2`, `y = eps^2 y2`.
//! The chart-1 field is stored after division by `r1`; it lives on the time
//! `t = tau/eps` up to that factor.

use nalgebra::{Complex, Matrix2, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::OdeSystem;
use crate::manifolds::{eig2, ExclusionBall};
use crate::model::{ScaledParams, StateF, StateS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chart1State {
    pub a1: f64,
    pub b1: f64,
    pub r1: f64,
    pub y1: f64,
    pub eps1: f64,
}

impl Chart1State {
    pub fn new(a1: f64, b1: f64, r1: f64, y1: f64, eps1: f64) -> Self {
        Self { a1, b1, r1, y1, eps1 }
    }

    pub fn to_vector(self) -> SVector<f64, 5> {
        SVector::<f64, 5>::from([self.a1, self.b1, self.r1, self.y1, self.eps1])
    }

    pub fn from_vector(v: &SVector<f64, 5>) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4])
    }
}

pub fn to_chart1(s: StateF, eps: f64) -> Result<Chart1State> {
    if !(s.x > 0.0) {
        return Err(Error::ChartDomain(format!("chart 1 needs x > 0, got {}", s.x)));
    }
    Ok(Chart1State::new(s.a, s.b, s.x, s.y / (s.x * s.x), eps / s.x))
}

/// Inverse of [`to_chart1`]; returns the fast state and `eps = r1 eps1`.
pub fn from_chart1(c: Chart1State) -> Result<(StateF, f64)> {
    if c.r1 < 0.0 {
        return Err(Error::ChartDomain(format!("r1 must be nonnegative, got {}", c.r1)));
    }
    Ok((StateF::new(c.a1, c.b1, c.r1, c.r1 * c.r1 * c.y1), c.r1 * c.eps1))
}

/// Chart change 1 -> 2; returns the scaled state and `r2 = eps`.
pub fn chart12(c: Chart1State) -> Result<(StateS, f64)> {
    if c.eps1 == 0.0 {
        return Err(Error::ChartDomain("eps1 = 0 lies on the equator, outside chart 2".into()));
    }
    let e = c.eps1;
    Ok((StateS::new(c.a1, c.b1, 1.0 / e, c.y1 / (e * e)), c.r1 * e))
}

pub fn chart21(s: StateS, r2: f64) -> Result<Chart1State> {
    if !(s.x2 > 0.0) {
        return Err(Error::ChartDomain(format!("chart 1 needs x2 > 0, got {}", s.x2)));
    }
    Ok(Chart1State::new(s.a2, s.b2, r2 * s.x2, s.y2 / (s.x2 * s.x2), 1.0 / s.x2))
}

fn g_factor(c: &Chart1State, sp: &ScaledParams) -> f64 {
    let e = c.eps1;
    -1.0 + e * (c.b1 - sp.xi) + 3.0 * c.a1 * c.b1 * c.y1 + e * e * sp.delta
}

/// Desingularized chart-1 vector field.
pub fn rhs_chart1(c: Chart1State, sp: &ScaledParams) -> Chart1State {
    let g = g_factor(&c, sp);
    let (e, r) = (c.eps1, c.r1);
    let q = c.a1 * c.b1;
    Chart1State::new(
        e * r * r * (e * e * (sp.mu - sp.alpha * c.a1) - q * c.y1),
        e * r * r * sp.eps_b * (e * e - e * c.b1 - q * c.y1),
        r * g,
        sp.kappa * e * (1.0 - c.y1 * (1.0 + q)) - 2.0 * c.y1 * g,
        -e * g,
    )
}

/// Chart-1 field before division by `r1`.
pub fn rhs_chart1_raw(c: Chart1State, sp: &ScaledParams) -> Chart1State {
    let d = rhs_chart1(c, sp);
    Chart1State::new(c.r1 * d.a1, c.r1 * d.b1, c.r1 * d.r1, c.r1 * d.y1, c.r1 * d.eps1)
}

/// Chart-1 system for the integrator.
#[derive(Debug, Clone, Copy)]
pub struct Chart1System(pub ScaledParams);

impl OdeSystem<5> for Chart1System {
    fn rhs(&self, y: &SVector<f64, 5>) -> SVector<f64, 5> {
        rhs_chart1(Chart1State::from_vector(y), &self.0).to_vector()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquilibriumKind {
    UnstableNode,
    CenterStable,
    Saddle,
    Sink,
    Absent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    /// `(y1, eps1)`.
    pub coords: (f64, f64),
    pub kind: EquilibriumKind,
    pub eigenvalues: [(f64, f64); 2],
}

pub const EIG_SIGN_TOL: f64 = 1e-9;

/// Jacobian of the `(y1, eps1)` subsystem on a leaf `{r1 = 0}` (so `delta = 0`).
pub fn leaf_jacobian(a1: f64, b1: f64, y1: f64, eps1: f64, sp: &ScaledParams) -> Matrix2<f64> {
    let q = a1 * b1;
    let k = sp.kappa;
    let d = b1 - sp.xi;
    Matrix2::new(
        2.0 - 12.0 * q * y1 - eps1 * (k * (1.0 + q) + 2.0 * d),
        k - y1 * (k * (1.0 + q) + 2.0 * d),
        -3.0 * q * eps1,
        1.0 - 3.0 * q * y1 - 2.0 * eps1 * d,
    )
}

fn classify_eigs(ev: &[Complex<f64>; 2]) -> EquilibriumKind {
    let re = [ev[0].re, ev[1].re];
    let pos = re.iter().filter(|&&r| r > EIG_SIGN_TOL).count();
    let neg = re.iter().filter(|&&r| r < -EIG_SIGN_TOL).count();
    match (pos, neg) {
        (2, 0) => EquilibriumKind::UnstableNode,
        (0, 2) => EquilibriumKind::Sink,
        (1, 1) => EquilibriumKind::Saddle,
        (0, 1) => EquilibriumKind::CenterStable,
        _ => EquilibriumKind::Absent,
    }
}

fn make_eq(y1: f64, eps1: f64, a1: f64, b1: f64, sp: &ScaledParams) -> Equilibrium {
    let ev = eig2(&leaf_jacobian(a1, b1, y1, eps1, sp));
    Equilibrium {
        coords: (y1, eps1),
        kind: classify_eigs(&ev),
        eigenvalues: [(ev[0].re, ev[0].im), (ev[1].re, ev[1].im)],
    }
}

/// The equilibria `p1, p2, p3` of a leaf `{r1 = 0, a1, b1}`.
pub fn equilibria_chart1(a1: f64, b1: f64, sp: &ScaledParams) -> Result<[Equilibrium; 3]> {
    let q = a1 * b1;
    if 2.0 * q == 1.0 && b1 == sp.xi {
        return Err(Error::Degenerate(format!("2 a1 b1 = 1 and b1 = xi at ({a1}, {b1})")));
    }
    let p1 = make_eq(0.0, 0.0, a1, b1, sp);
    let p2 = make_eq(1.0 / (3.0 * q), 0.0, a1, b1, sp);
    let present = (sp.xi - b1) * (2.0 * q - 1.0) > 0.0;
    let p3 = if present {
        let eps1 = (1.0 - 2.0 * q) / ((1.0 + q) * (b1 - sp.xi));
        make_eq(1.0 / (1.0 + q), eps1, a1, b1, sp)
    } else {
        Equilibrium { coords: (f64::NAN, f64::NAN), kind: EquilibriumKind::Absent, eigenvalues: [(f64::NAN, 0.0); 2] }
    };
    Ok([p1, p2, p3])
}

/// Second-order coefficient of the center manifold `M1`.
pub fn c22(a1: f64, b1: f64, sp: &ScaledParams) -> f64 {
    let q = a1 * b1;
    sp.kappa * (1.0 + 4.0 * q) / (24.0 * q) * (2.0 * (b1 - sp.xi) + sp.kappa * (1.0 - 2.0 * q))
}

/// `y1` on `M1`; the graph does not depend on `r1` at this order.
pub fn m1_graph(_r1: f64, eps1: f64, a1: f64, b1: f64, sp: &ScaledParams) -> f64 {
    let q = a1 * b1;
    1.0 / (3.0 * q) + eps1 * (2.0 * (sp.xi - b1) + sp.kappa * (2.0 * q - 1.0)) / (6.0 * q) + c22(a1, b1, sp) * eps1 * eps1
}

/// Reduced flow `(r1', eps1')` on `M1`, truncated at second order.
pub fn m1_flow(r1: f64, eps1: f64, a1: f64, b1: f64, sp: &ScaledParams) -> (f64, f64) {
    let q = a1 * b1;
    let bracket = sp.kappa * (2.0 * q - 1.0) / 2.0 * eps1 + 3.0 * q * c22(a1, b1, sp) * eps1 * eps1;
    (r1 * bracket, -eps1 * bracket)
}

/// Invariance defect of the `M1` graph for the `(r1, y1, eps1)` system with `delta = 0`.
pub fn m1_residual(r1: f64, eps1: f64, a1: f64, b1: f64, sp: &ScaledParams) -> f64 {
    let s0 = sp.with_delta(0.0);
    let y1 = m1_graph(r1, eps1, a1, b1, &s0);
    let d = rhs_chart1(Chart1State::new(a1, b1, r1, y1, eps1), &s0);
    let q = a1 * b1;
    let dh = (2.0 * (s0.xi - b1) + s0.kappa * (2.0 * q - 1.0)) / (6.0 * q) + 2.0 * c22(a1, b1, &s0) * eps1;
    d.y1 - dh * d.eps1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApproachCase {
    C1,
    C2,
    C3,
    C4,
    Degenerate,
}

/// Approach/departure case from the signs of `2ab - 1` and `b - xi`.
pub fn classify_approach(a: f64, b: f64, sp: &ScaledParams, ball: &ExclusionBall) -> ApproachCase {
    if ball.contains(a, b) {
        return ApproachCase::Degenerate;
    }
    let s = 2.0 * a * b - 1.0;
    if b == sp.xi {
        return if 2.0 * a * sp.xi > 1.0 { ApproachCase::C4 } else { ApproachCase::Degenerate };
    }
    match (s < 0.0, s > 0.0, b < sp.xi) {
        (true, _, true) => ApproachCase::C1,
        (true, _, false) => ApproachCase::C2,
        (_, true, true) => ApproachCase::C3,
        (_, true, false) => ApproachCase::C4,
        _ => ApproachCase::Degenerate,
    }
}

/// Sample `(y1, eps1, y1', eps1')` on the leaf `{r1 = 0}` over a rectangular grid.
pub fn phase_grid(
    a1: f64,
    b1: f64,
    sp: &ScaledParams,
    y1_range: (f64, f64),
    eps1_range: (f64, f64),
    n: usize,
) -> Vec<[f64; 4]> {
    let n = n.max(2);
    let s0 = sp.with_delta(0.0);
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let y1 = y1_range.0 + (y1_range.1 - y1_range.0) * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let e1 = eps1_range.0 + (eps1_range.1 - eps1_range.0) * j as f64 / (n - 1) as f64;
            let d = rhs_chart1(Chart1State::new(a1, b1, 0.0, y1, e1), &s0);
            out.push([y1, e1, d.y1, d.eps1]);
        }
    }
    out
}
