//! Critical manifolds of the fast-scaled and second-chart systems.
//!
//! `C0 = {y = x^2/(3ab)}` carries the fold set `L0 = {x = y = 0}`. In the
//! second chart the critical manifold `C2,0` is parametrized by `(b2, x2)`,
//! has four normally hyperbolic branches, and a fold curve `x2 = l2(a2, b2)`.

use nalgebra::{Complex, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::{DomainFloors, ScaledParams};

/// `y` on `C0`.
pub fn c0_y(a: f64, b: f64, x: f64, floors: &DomainFloors) -> Result<f64> {
    floors.check(a, b)?;
    Ok(x * x / (3.0 * a * b))
}

/// `F` and its derivatives at a point of `L0` (`x = y = 0`, `eps = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldData {
    pub f: f64,
    pub f_x: f64,
    pub f_xx: f64,
    pub f_y: f64,
}

pub fn fold_data_l0(a: f64, b: f64) -> FoldData {
    // F = -x^2 + 3aby at eps = 0.
    FoldData { f: 0.0, f_x: 0.0, f_xx: -2.0, f_y: 3.0 * a * b }
}

/// `2 x2^2 + x2 (b2 - xi) + delta`, the common factor of the `C2,0` parametrization.
fn c20_factor(b2: f64, x2: f64, sp: &ScaledParams) -> f64 {
    2.0 * x2 * x2 + x2 * (b2 - sp.xi) + sp.delta
}

/// Point `(a2, y2)` of `C2,0` above `(b2, x2)`.
pub fn c20_point(b2: f64, x2: f64, sp: &ScaledParams) -> Result<(f64, f64)> {
    let q = c20_factor(b2, x2, sp);
    let den = b2 * q;
    if den == 0.0 || !den.is_finite() {
        return Err(Error::Degenerate(format!(
            "C2,0 parametrization singular at (b2, x2) = ({b2}, {x2})"
        )));
    }
    let a2 = (x2 * x2 + x2 * (sp.xi - b2) - sp.delta) / den;
    Ok((a2, q / 3.0))
}

/// Residuals of the two fast equations (multiplied by `eps^2`).
pub fn fast_residuals(a2: f64, b2: f64, x2: f64, y2: f64, sp: &ScaledParams) -> (f64, f64) {
    let aby = a2 * b2 * y2;
    (
        b2 * x2 - x2 * x2 + 3.0 * aby - sp.xi * x2 + sp.delta,
        x2 * x2 - y2 - aby,
    )
}

/// Fold curve `l2 = (1 + ab)(xi - b)/(4ab - 2)`.
pub fn l2_fold(a2: f64, b2: f64, xi: f64) -> Result<f64> {
    let q = a2 * b2;
    if 2.0 * q == 1.0 {
        return Err(Error::Degenerate(format!("2 a2 b2 = 1 at ({a2}, {b2})")));
    }
    Ok((1.0 + q) * (xi - b2) / (4.0 * q - 2.0))
}

/// Jacobian of the `(x2, y2)` fast subsystem (times `eps^2`).
pub fn fast_jacobian(a2: f64, b2: f64, x2: f64, sp: &ScaledParams) -> Matrix2<f64> {
    let q = a2 * b2;
    Matrix2::new(
        -2.0 * x2 + b2 - sp.xi,
        3.0 * q,
        2.0 * sp.kappa * x2,
        -sp.kappa * (1.0 + q),
    )
}

/// Eigenvalues of [`fast_jacobian`], ordered by real part.
pub fn fast_jacobian_eigs(a2: f64, b2: f64, x2: f64, sp: &ScaledParams) -> [Complex<f64>; 2] {
    eig2(&fast_jacobian(a2, b2, x2, sp))
}

pub(crate) fn eig2(m: &Matrix2<f64>) -> [Complex<f64>; 2] {
    let tr = m.trace();
    let det = m.determinant();
    let disc = tr * tr / 4.0 - det;
    let half = tr / 2.0;
    if disc >= 0.0 {
        let s = disc.sqrt();
        // Avoid cancellation in the smaller root.
        let big = if half >= 0.0 { half + s } else { half - s };
        let small = if big != 0.0 { det / big } else { 0.0 };
        let (lo, hi) = if big < small { (big, small) } else { (small, big) };
        [Complex::new(lo, 0.0), Complex::new(hi, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [Complex::new(half, -s), Complex::new(half, s)]
    }
}

/// Error-free transformations for compensated Horner evaluation.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// `sum coeffs[i] t^i` by compensated Horner.
pub(crate) fn comp_horner(coeffs: &[f64], t: f64) -> f64 {
    let mut s = *coeffs.last().unwrap_or(&0.0);
    let mut c = 0.0;
    for &a in coeffs.iter().rev().skip(1) {
        let (p, pe) = two_prod(s, t);
        let (ns, se) = two_sum(p, a);
        s = ns;
        c = c * t + (pe + se);
    }
    s + c
}

/// Second-order expansions in `delta` of the branches over `(a2, b2)` with `b2 < xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchExpansions {
    /// `(x2, y2)` on the attracting branch.
    pub attracting: (f64, f64),
    /// `(x2, y2)` on the repelling branch; present only when `2 a2 b2 > 1`.
    pub repelling: Option<(f64, f64)>,
}

pub fn branch_expansions(a2: f64, b2: f64, delta: f64, sp: &ScaledParams) -> Result<BranchExpansions> {
    if b2 >= sp.xi {
        return Err(domain(format!("branch expansions need b2 < xi, got b2 = {b2}")));
    }
    let q = a2 * b2;
    let d = b2 - sp.xi;
    let att_x = comp_horner(&[0.0, -1.0 / d, (1.0 - 2.0 * q) / ((1.0 + q) * d * d * d)], delta);
    let att_y = comp_horner(&[0.0, 0.0, 1.0 / ((1.0 + q) * d * d)], delta);
    let repelling = (2.0 * q > 1.0).then(|| {
        let m = 2.0 * q - 1.0;
        let x = comp_horner(&[-(1.0 + q) * d / m, 1.0 / d, m / ((1.0 + q) * d * d * d)], delta);
        let y = comp_horner(
            &[(1.0 + q) * d * d / (m * m), -2.0 / m, -1.0 / ((1.0 + q) * d * d)],
            delta,
        );
        (x, y)
    });
    Ok(BranchExpansions { attracting: (att_x, att_y), repelling })
}

/// Exact roots `x2` of the critical-manifold quadratic over fixed `(a2, b2)`,
/// with `y2 = x2^2/(1 + a2 b2)`. Returns the nonnegative roots in increasing order.
pub fn exact_branches(a2: f64, b2: f64, sp: &ScaledParams) -> Vec<(f64, f64)> {
    let q = a2 * b2;
    // c x^2 + (b - xi) x + delta = 0 with c = (2q - 1)/(1 + q).
    let c = (2.0 * q - 1.0) / (1.0 + q);
    let bb = b2 - sp.xi;
    let dl = sp.delta;
    let mut roots = Vec::new();
    if c == 0.0 {
        if bb != 0.0 {
            roots.push(-dl / bb);
        }
    } else {
        let disc = bb * bb - 4.0 * c * dl;
        if disc >= 0.0 {
            let s = disc.sqrt();
            let qq = -0.5 * (bb + bb.signum() * s);
            if qq != 0.0 {
                roots.push(qq / c);
                roots.push(dl / qq);
            } else {
                roots.push(0.0);
            }
        }
    }
    let mut out: Vec<(f64, f64)> = roots
        .into_iter()
        .filter(|x| x.is_finite() && *x >= 0.0)
        .map(|x| (x, x * x / (1.0 + q)))
        .collect();
    out.sort_by(|u, v| u.0.total_cmp(&v.0));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalBranch {
    S2aMinus,
    S2rMinus,
    S2aPlus,
    S2rPlus,
    FoldCurve,
    Degenerate,
}

/// The set `(a2 - 1/(2 xi))^2 + (b2 - xi)^2 <= upsilon` around the doubly degenerate point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExclusionBall {
    pub center: (f64, f64),
    pub upsilon: f64,
}

pub const DEFAULT_UPSILON: f64 = 0.05;
pub const ON_MANIFOLD_TOL: f64 = 1e-8;

impl ExclusionBall {
    pub fn new(xi: f64, upsilon: f64) -> Result<Self> {
        if !(upsilon > 0.0) {
            return Err(domain(format!("upsilon must be positive, got {upsilon}")));
        }
        Ok(Self { center: (1.0 / (2.0 * xi), xi), upsilon })
    }

    pub fn contains(&self, a2: f64, b2: f64) -> bool {
        let (da, db) = (a2 - self.center.0, b2 - self.center.1);
        da * da + db * db <= self.upsilon
    }
}

/// Tag a point of `C2,0` given by `(a2, b2, x2)`.
///
/// Branches are told apart by the sign of the fast Jacobian determinant, which
/// reduces to `x2 < l2` (minus side) and `x2 > l2` (plus side) in the quadrants
/// `2ab > 1` and `2ab < 1` respectively.
pub fn classify_point(a2: f64, b2: f64, x2: f64, sp: &ScaledParams, ball: &ExclusionBall) -> Result<CriticalBranch> {
    if ball.contains(a2, b2) {
        return Ok(CriticalBranch::Degenerate);
    }
    let on_zero_branch = sp.delta == 0.0 && x2.abs() <= ON_MANIFOLD_TOL;
    if !on_zero_branch {
        let (a_m, _) = c20_point(b2, x2, sp)?;
        if (a_m - a2).abs() > ON_MANIFOLD_TOL * a2.abs().max(1.0) {
            return Err(Error::Domain(format!(
                "point ({a2}, {b2}, {x2}) is off C2,0 (manifold a2 = {a_m})"
            )));
        }
    }
    if b2 == sp.xi || 2.0 * a2 * b2 == 1.0 {
        return Ok(CriticalBranch::Degenerate);
    }
    let l2 = l2_fold(a2, b2, sp.xi)?;
    if (x2 - l2).abs() <= ON_MANIFOLD_TOL * l2.abs().max(1.0) {
        return Ok(CriticalBranch::FoldCurve);
    }
    // det of the fast Jacobian is 2 kappa (2ab - 1)(l2 - x2); attracting iff positive.
    let attracting = (2.0 * a2 * b2 - 1.0) * (l2 - x2) > 0.0;
    Ok(match (b2 < sp.xi, attracting) {
        (true, true) => CriticalBranch::S2aMinus,
        (true, false) => CriticalBranch::S2rMinus,
        (false, true) => CriticalBranch::S2aPlus,
        (false, false) => CriticalBranch::S2rPlus,
    })
}
