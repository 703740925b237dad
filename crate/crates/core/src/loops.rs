//! Large loops of the slow flow on `C0`:
//! `a' = -a b y`, `b' = -eps_b a b y`, `y' = kappa (2ab - 1) y`.
//!
//! Trajectories stay on the lines `b = eps_b a + K1` and the height is an
//! explicit function of `a`, so a loop launched at `(alpha1, beta1, 0)` with
//! `2 alpha1 beta1 > 1` lands again on `{y = 0}` at a unique `alpha2 < alpha1`.

use nalgebra::SVector;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::integrate::OdeSystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopSpec {
    pub alpha1: f64,
    pub beta1: f64,
    pub kappa: f64,
    pub eps_b: f64,
}

impl LoopSpec {
    pub fn new(alpha1: f64, beta1: f64, kappa: f64, eps_b: f64) -> Result<Self> {
        if !(alpha1 > 0.0 && beta1 > 0.0 && kappa > 0.0 && eps_b > 0.0) {
            return Err(domain(format!("loop launch needs positive data, got ({alpha1}, {beta1}, {kappa}, {eps_b})")));
        }
        if !(beta1 - eps_b * alpha1 > 0.0) {
            return Err(domain(format!("beta1 - eps_b alpha1 = {} must be positive", beta1 - eps_b * alpha1)));
        }
        Ok(Self { alpha1, beta1, kappa, eps_b })
    }

    /// `K1 = beta1 - eps_b alpha1`.
    pub fn k1(&self) -> f64 {
        self.beta1 - self.eps_b * self.alpha1
    }
}

/// Height of the loop over `a`; zero at `a = alpha1`.
pub fn loop_y(a: f64, spec: &LoopSpec) -> Result<f64> {
    let (a1, b1, eb) = (spec.alpha1, spec.beta1, spec.eps_b);
    let den = a1 * (b1 + eb * (a - a1));
    let arg = b1 * a / den;
    if !(a > 0.0) || den == 0.0 || !(arg > 0.0) {
        return Err(Error::Branch { factor: "beta1 a / (alpha1 (beta1 + eps_b (a - alpha1)))", value: arg });
    }
    let k1 = spec.k1();
    // ln(arg) via ln_1p keeps full precision near a = alpha1.
    let lg = ((a - a1) * k1 / den).ln_1p();
    Ok(spec.kappa / k1 * (2.0 * (a - a1) * (a1 * eb - b1) + lg))
}

/// `dy/da = kappa (1 - 2 a b(a)) / (a b(a))` along the invariant line.
pub fn loop_slope(a: f64, spec: &LoopSpec) -> f64 {
    let b = invariant_line(spec, a);
    spec.kappa * (1.0 - 2.0 * a * b) / (a * b)
}

/// Critical points `(a_plus, a_minus)` of `loop_y`.
pub fn loop_extrema(spec: &LoopSpec) -> (f64, f64) {
    let eb = spec.eps_b;
    let p = 2.0 * spec.alpha1 * eb - 2.0 * spec.beta1;
    let s = (8.0 * eb + p * p).sqrt();
    // a_plus from the product of roots to avoid cancellation when eps_b is small.
    let a_minus = (p - s) / (4.0 * eb);
    let a_plus = -1.0 / (2.0 * eb * a_minus);
    (a_plus, a_minus)
}

/// Second zero `alpha2 in (0, a_plus)` of `loop_y`.
pub fn landing_point(spec: &LoopSpec) -> Result<f64> {
    let q = 2.0 * spec.alpha1 * spec.beta1;
    if !(q > 1.0) {
        return Err(domain(format!("no loop: 2 alpha1 beta1 = {q} <= 1")));
    }
    let (a_plus, _) = loop_extrema(spec);
    if !(a_plus < spec.alpha1) {
        return Ok(spec.alpha1);
    }
    let f = |a: f64| loop_y(a, spec).unwrap_or(f64::NEG_INFINITY);
    let (mut lo, hi) = (a_plus * 1e-6, a_plus);
    let fhi = f(hi);
    if !(fhi > 0.0) {
        // Collapsed loop: the hump is below resolution.
        return Ok(a_plus);
    }
    while f(lo) >= 0.0 {
        lo *= 1e-3;
        if lo < f64::MIN_POSITIVE {
            return Err(Error::Root("landing point bracket failed".into()));
        }
    }
    let mut conv = roots::SimpleConvergency { eps: 1e-15, max_iter: 200 };
    roots::find_root_brent(lo, hi, f, &mut conv).map_err(|e| Error::Root(format!("landing point: {e:?}")))
}

/// `b = eps_b a + beta1 - eps_b alpha1`.
pub fn invariant_line(spec: &LoopSpec, a: f64) -> f64 {
    spec.eps_b * a + spec.k1()
}

pub fn on_line(a: f64, b: f64, spec: &LoopSpec, tol: f64) -> bool {
    (b - invariant_line(spec, a)).abs() <= tol
}

/// The slow flow on `C0` in `(a, b, y)`.
#[derive(Debug, Clone, Copy)]
pub struct LoopSystem {
    pub kappa: f64,
    pub eps_b: f64,
}

impl OdeSystem<3> for LoopSystem {
    fn rhs(&self, s: &SVector<f64, 3>) -> SVector<f64, 3> {
        let (a, b, y) = (s[0], s[1], s[2]);
        let aby = a * b * y;
        SVector::<f64, 3>::new(-aby, -self.eps_b * aby, self.kappa * (2.0 * a * b - 1.0) * y)
    }

    fn jacobian(&self, s: &SVector<f64, 3>) -> nalgebra::SMatrix<f64, 3, 3> {
        let (a, b, y) = (s[0], s[1], s[2]);
        let (k, e) = (self.kappa, self.eps_b);
        nalgebra::SMatrix::<f64, 3, 3>::new(
            -b * y, -a * y, -a * b,
            -e * b * y, -e * a * y, -e * a * b,
            2.0 * k * b * y, 2.0 * k * a * y, k * (2.0 * a * b - 1.0),
        )
    }
}

pub const LOOP_SAMPLES: usize = 2000;

/// `(a, b, y)` along the loop, `n` points log-spaced in `a` from `alpha1` down to `alpha2`.
pub fn loop_polyline(spec: &LoopSpec, n: usize) -> Result<Vec<[f64; 3]>> {
    let a2 = landing_point(spec)?;
    let n = n.max(2);
    let (l1, l2) = (spec.alpha1.ln(), a2.ln());
    (0..n)
        .map(|i| {
            let a = if i == 0 {
                spec.alpha1
            } else if i == n - 1 {
                a2
            } else {
                (l1 + (l2 - l1) * i as f64 / (n - 1) as f64).exp()
            };
            let y = if i == 0 || i == n - 1 { 0.0 } else { loop_y(a, spec)?.max(0.0) };
            Ok([a, invariant_line(spec, a), y])
        })
        .collect()
}
