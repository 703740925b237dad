//! The Olsen peroxidase-oxidase model in its three scalings.
//!
//! * original variables `(A, B, X, Y)` on time `T` with rate constants `k1..k8, k-7`;
//! * scaled variables `(a2, b2, x2, y2)` on the slow time `s`;
//! * fast variables `(a, b, x, y) = (a2, b2, eps*x2, eps^2*y2)` on `tau = s/eps^2`.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::integrate::OdeSystem;

/// Dimensional rate constants of the original model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OlsenParams {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    pub k6: f64,
    pub k7: f64,
    pub k_minus7: f64,
    pub k8: f64,
}

impl OlsenParams {
    /// Standard rate constants with the bifurcation parameter `k1` left free.
    pub fn standard(k1: f64) -> Self {
        Self {
            k1,
            k2: 250.0,
            k3: 0.035,
            k4: 20.0,
            k5: 5.35,
            k6: 1e-5,
            k7: 0.8,
            k_minus7: 0.1,
            k8: 0.825,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("k4", self.k4),
            ("k5", self.k5),
            ("k6", self.k6),
            ("k7", self.k7),
            ("k_minus7", self.k_minus7),
            ("k8", self.k8),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn sqrt_2k2k8(&self) -> f64 {
        (2.0 * self.k2 * self.k8).sqrt()
    }

    /// Multipliers taking scaled quantities back to original ones.
    pub fn scaling(&self) -> OriginalScaling {
        let r = self.sqrt_2k2k8();
        OriginalScaling {
            a: self.k1 * self.k5 / (self.k3 * r),
            b: r / self.k1,
            x: self.k8 / (2.0 * self.k2),
            y: self.k8 / self.k5,
            t: self.k1 * self.k5 / (self.k3 * self.k8 * r),
        }
    }
}

/// `A = a*a2`, `B = b*b2`, `X = x*x2`, `Y = y*y2`, `T = t*s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OriginalScaling {
    pub a: f64,
    pub b: f64,
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl OriginalScaling {
    pub fn to_original(&self, s: StateS) -> StateO {
        StateO::new(self.a * s.a2, self.b * s.b2, self.x * s.x2, self.y * s.y2)
    }

    pub fn to_scaled(&self, o: StateO) -> StateS {
        StateS::new(o.a / self.a, o.b / self.b, o.x / self.x, o.y / self.y)
    }
}

/// Dimensionless parameters. `eps` is stored; `eps2()` is what the equations use.
///
/// `delta = 0` is admitted: it is the exact canard configuration in which
/// `{x2 = 0 = y2}` is invariant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledParams {
    pub mu: f64,
    pub alpha: f64,
    pub eps_b: f64,
    pub eps: f64,
    pub xi: f64,
    pub delta: f64,
    pub kappa: f64,
}

impl ScaledParams {
    pub fn new(mu: f64, alpha: f64, eps_b: f64, eps: f64, xi: f64, delta: f64, kappa: f64) -> Result<Self> {
        let sp = Self { mu, alpha, eps_b, eps, xi, delta, kappa };
        sp.validate()?;
        Ok(sp)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mu", self.mu),
            ("alpha", self.alpha),
            ("eps_b", self.eps_b),
            ("eps", self.eps),
            ("xi", self.xi),
            ("kappa", self.kappa),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(domain(format!("delta must be nonnegative, got {}", self.delta)));
        }
        if self.eps >= 1.0 {
            return Err(domain(format!("eps must be below 1, got {}", self.eps)));
        }
        Ok(())
    }

    pub fn eps2(&self) -> f64 {
        self.eps * self.eps
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    /// `delta / eps^2`.
    pub fn delta_hat(&self) -> f64 {
        self.delta / self.eps2()
    }
}

/// Map the rate constants to the dimensionless parameter set.
pub fn transform_params(p: &OlsenParams) -> Result<ScaledParams> {
    p.validate()?;
    let r = p.sqrt_2k2k8();
    let eps2 = p.k3 * p.k8 / (p.k1 * p.k5);
    Ok(ScaledParams {
        mu: p.k7 / p.k8,
        alpha: p.k1 * p.k5 * p.k_minus7 / (p.k3 * p.k8 * r),
        eps_b: p.k1 * p.k1 * p.k5 / (2.0 * p.k2 * p.k3 * p.k8),
        eps: eps2.sqrt(),
        xi: p.k4 / r,
        delta: p.k6 / p.k8,
        kappa: r / p.k5,
    })
}

/// Relative size of `eps_b` and `eps^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeTag {
    EpsBMuchSmaller,
    Comparable,
    EpsBMuchLarger,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub tag: RegimeTag,
    /// `eps_b / eps^2`.
    pub ratio: f64,
}

pub const DEFAULT_REGIME_THRESHOLD: f64 = 3.0;

/// Classify by `eps_b / eps^2` against `threshold` and its reciprocal.
pub fn classify_regime(sp: &ScaledParams, threshold: f64) -> Result<Regime> {
    if !(threshold > 1.0) {
        return Err(domain(format!("regime threshold must exceed 1, got {threshold}")));
    }
    let ratio = sp.eps_b / sp.eps2();
    let tag = if ratio > threshold {
        RegimeTag::EpsBMuchLarger
    } else if ratio < 1.0 / threshold {
        RegimeTag::EpsBMuchSmaller
    } else {
        RegimeTag::Comparable
    };
    Ok(Regime { tag, ratio })
}

macro_rules! state4 {
    ($(#[$m:meta])* $name:ident { $a:ident, $b:ident, $c:ident, $d:ident }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
        pub struct $name {
            pub $a: f64,
            pub $b: f64,
            pub $c: f64,
            pub $d: f64,
        }

        impl $name {
            pub const fn new($a: f64, $b: f64, $c: f64, $d: f64) -> Self {
                Self { $a, $b, $c, $d }
            }

            pub fn to_vector(self) -> Vector4<f64> {
                Vector4::new(self.$a, self.$b, self.$c, self.$d)
            }

            pub fn from_vector(v: &Vector4<f64>) -> Self {
                Self::new(v[0], v[1], v[2], v[3])
            }

            pub fn is_nonnegative(&self) -> bool {
                self.$a >= 0.0 && self.$b >= 0.0 && self.$c >= 0.0 && self.$d >= 0.0
            }
        }
    };
}

state4!(
    /// Original concentrations `(A, B, X, Y)`.
    StateO { a, b, x, y }
);
state4!(
    /// Scaled state `(a2, b2, x2, y2)`.
    StateS { a2, b2, x2, y2 }
);
state4!(
    /// Fast-scaled state `(a, b, x, y)`.
    StateF { a, b, x, y }
);

/// Floors `a*`, `b*` delimiting the working region `D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainFloors {
    pub a_min: f64,
    pub b_min: f64,
}

impl Default for DomainFloors {
    fn default() -> Self {
        Self { a_min: 0.01, b_min: 0.1 }
    }
}

impl DomainFloors {
    pub fn contains(&self, a: f64, b: f64) -> bool {
        a > self.a_min && b > self.b_min
    }

    pub fn check(&self, a: f64, b: f64) -> Result<()> {
        if self.contains(a, b) {
            Ok(())
        } else {
            Err(domain(format!(
                "(a, b) = ({a}, {b}) outside D (a* = {}, b* = {})",
                self.a_min, self.b_min
            )))
        }
    }
}

pub fn rhs_original(s: StateO, p: &OlsenParams) -> StateO {
    let r3 = p.k3 * s.a * s.b * s.y;
    let r1 = p.k1 * s.b * s.x;
    let r2 = p.k2 * s.x * s.x;
    StateO::new(
        -r3 + p.k7 - p.k_minus7 * s.a,
        -r3 - r1 + p.k8,
        r1 - 2.0 * r2 + 3.0 * r3 - p.k4 * s.x + p.k6,
        -r3 + 2.0 * r2 - p.k5 * s.y,
    )
}

/// Right-hand side on the slow time `s`.
pub fn rhs_scaled(s: StateS, sp: &ScaledParams) -> StateS {
    let e2 = sp.eps2();
    let aby = s.a2 * s.b2 * s.y2;
    StateS::new(
        sp.mu - sp.alpha * s.a2 - aby,
        sp.eps_b * (1.0 - s.b2 * s.x2 - aby),
        (s.b2 * s.x2 - s.x2 * s.x2 + 3.0 * aby - sp.xi * s.x2 + sp.delta) / e2,
        sp.kappa * (s.x2 * s.x2 - s.y2 - aby) / e2,
    )
}

/// The fast `x` nonlinearity `F(a, b, x, y; eps)`; `eps * dx/dtau = F`.
pub fn fast_f(s: StateF, sp: &ScaledParams) -> f64 {
    let e = sp.eps;
    -s.x * s.x + e * (s.b - sp.xi) * s.x + 3.0 * s.a * s.b * s.y + e * e * sp.delta
}

/// Right-hand side on the fast time `tau`.
pub fn rhs_fast(s: StateF, sp: &ScaledParams) -> StateF {
    let e = sp.eps;
    let aby = s.a * s.b * s.y;
    StateF::new(
        e * e * (sp.mu - sp.alpha * s.a) - aby,
        e * sp.eps_b * (e - s.b * s.x) - sp.eps_b * aby,
        fast_f(s, sp) / e,
        sp.kappa * (s.x * s.x - s.y - aby),
    )
}

pub fn scale_state(s: StateS, eps: f64) -> StateF {
    StateF::new(s.a2, s.b2, eps * s.x2, eps * eps * s.y2)
}

pub fn unscale_state(f: StateF, eps: f64) -> StateS {
    StateS::new(f.a, f.b, f.x / eps, f.y / (eps * eps))
}

/// Original model as an ODE system on time `T`.
#[derive(Debug, Clone, Copy)]
pub struct OriginalSystem(pub OlsenParams);

impl OdeSystem<4> for OriginalSystem {
    fn rhs(&self, y: &Vector4<f64>) -> Vector4<f64> {
        rhs_original(StateO::from_vector(y), &self.0).to_vector()
    }

    fn jacobian(&self, u: &Vector4<f64>) -> Matrix4<f64> {
        let p = &self.0;
        let (a, b, x, y) = (u[0], u[1], u[2], u[3]);
        let k3 = p.k3;
        Matrix4::new(
            -k3 * b * y - p.k_minus7, -k3 * a * y, 0.0, -k3 * a * b,
            -k3 * b * y, -k3 * a * y - p.k1 * x, -p.k1 * b, -k3 * a * b,
            3.0 * k3 * b * y, p.k1 * x + 3.0 * k3 * a * y, p.k1 * b - 4.0 * p.k2 * x - p.k4, 3.0 * k3 * a * b,
            -k3 * b * y, -k3 * a * y, 4.0 * p.k2 * x, -k3 * a * b - p.k5,
        )
    }
}

/// Scaled model as an ODE system on the slow time `s`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledSystem(pub ScaledParams);

impl OdeSystem<4> for ScaledSystem {
    fn rhs(&self, y: &Vector4<f64>) -> Vector4<f64> {
        rhs_scaled(StateS::from_vector(y), &self.0).to_vector()
    }

    fn jacobian(&self, u: &Vector4<f64>) -> Matrix4<f64> {
        let sp = &self.0;
        let (a, b, x, y) = (u[0], u[1], u[2], u[3]);
        let e2 = sp.eps2();
        let (eb, k) = (sp.eps_b, sp.kappa);
        Matrix4::new(
            -sp.alpha - b * y, -a * y, 0.0, -a * b,
            -eb * b * y, -eb * (x + a * y), -eb * b, -eb * a * b,
            3.0 * b * y / e2, (3.0 * a * y + x) / e2, (b - 2.0 * x - sp.xi) / e2, 3.0 * a * b / e2,
            -k * b * y / e2, -k * a * y / e2, 2.0 * k * x / e2, -k * (1.0 + a * b) / e2,
        )
    }
}

/// Fast-scaled model as an ODE system on `tau`.
#[derive(Debug, Clone, Copy)]
pub struct FastSystem(pub ScaledParams);

impl OdeSystem<4> for FastSystem {
    fn rhs(&self, y: &Vector4<f64>) -> Vector4<f64> {
        rhs_fast(StateF::from_vector(y), &self.0).to_vector()
    }

    fn jacobian(&self, u: &Vector4<f64>) -> Matrix4<f64> {
        let sp = &self.0;
        let (a, b, x, y) = (u[0], u[1], u[2], u[3]);
        let e = sp.eps;
        let (eb, k) = (sp.eps_b, sp.kappa);
        Matrix4::new(
            -e * e * sp.alpha - b * y, -a * y, 0.0, -a * b,
            -eb * b * y, -e * eb * x - eb * a * y, -e * eb * b, -eb * a * b,
            3.0 * b * y / e, (e * x + 3.0 * a * y) / e, (-2.0 * x + e * (b - sp.xi)) / e, 3.0 * a * b / e,
            -k * b * y, -k * a * y, 2.0 * k * x, -k * (1.0 + a * b),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_k7_k8_gives_unit_mu() {
        let mut p = OlsenParams::standard(0.41);
        p.k7 = p.k8;
        assert_eq!(transform_params(&p).unwrap().mu, 1.0);
    }

    #[test]
    fn nonpositive_rate_is_rejected() {
        let mut p = OlsenParams::standard(0.41);
        p.k4 = 0.0;
        assert!(transform_params(&p).is_err());
    }

    #[test]
    fn origin_rates() {
        let p = OlsenParams::standard(0.35);
        let d = rhs_original(StateO::default(), &p);
        assert_eq!(d, StateO::new(p.k7, p.k8, p.k6, 0.0));
    }

    #[test]
    fn scale_example() {
        let f = scale_state(StateS::new(1.0, 1.0, 1.0, 1.0), 0.1);
        assert_eq!(f.a, 1.0);
        assert!((f.x - 0.1).abs() < 1e-15 && (f.y - 0.01).abs() < 1e-15);
    }

    #[test]
    fn regime_comparable_on_equality() {
        let mut sp = transform_params(&OlsenParams::standard(0.41)).unwrap();
        sp.eps_b = sp.eps2();
        assert_eq!(classify_regime(&sp, 3.0).unwrap().tag, RegimeTag::Comparable);
        assert!(classify_regime(&sp, 1.0).is_err());
    }

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        let sp = transform_params(&OlsenParams::standard(0.41)).unwrap();
        let u = Vector4::new(0.7, 0.9, 0.3, 0.2);
        let check = |j: Matrix4<f64>, fd: Matrix4<f64>| {
            let scale = j.amax().max(1.0);
            assert!((j - fd).amax() / scale < 1e-6, "{j}\n{fd}");
        };
        let s = ScaledSystem(sp);
        check(s.jacobian(&u), crate::integrate::fd_jacobian(&s, &u));
        let f = FastSystem(sp);
        check(f.jacobian(&u), crate::integrate::fd_jacobian(&f, &u));
        let o = OriginalSystem(OlsenParams::standard(0.41));
        let uo = Vector4::new(6.0, 50.0, 1e-3, 1e-2);
        check(o.jacobian(&uo), crate::integrate::fd_jacobian(&o, &uo));
    }
}
