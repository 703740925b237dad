//! Adaptive ODE integration with section-crossing detection.
//!
//! Two methods are provided: Dormand-Prince 5(4) for nonstiff work and the
//! four-stage, stiffly accurate Rosenbrock scheme RODAS3 (order 3, embedded
//! order 2) for the stiff Olsen systems. Crossings are located by a bracketing
//! root search over the length of a single step taken from the last accepted
//! point, so the returned state is a genuine integrator state.

use nalgebra::{DMatrix, DVector, SMatrix, SVector};
use roots::{find_root_brent, SimpleConvergency};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An autonomous system `y' = f(y)`.
pub trait OdeSystem<const N: usize>: Sync {
    fn rhs(&self, y: &SVector<f64, N>) -> SVector<f64, N>;

    fn jacobian(&self, y: &SVector<f64, N>) -> SMatrix<f64, N, N> {
        fd_jacobian(self, y)
    }
}

/// Forward-difference Jacobian.
pub fn fd_jacobian<S: OdeSystem<N> + ?Sized, const N: usize>(
    sys: &S,
    y: &SVector<f64, N>,
) -> SMatrix<f64, N, N> {
    let f0 = sys.rhs(y);
    let mut j = SMatrix::<f64, N, N>::zeros();
    for k in 0..N {
        let h = f64::EPSILON.sqrt() * y[k].abs().max(1e-8);
        let mut yp = *y;
        yp[k] += h;
        let col = (sys.rhs(&yp) - f0) / h;
        j.set_column(k, &col);
    }
    j
}

/// Closure wrapper so tests and small problems need no named type.
pub struct FnSystem<F>(pub F);

impl<F, const N: usize> OdeSystem<N> for FnSystem<F>
where
    F: Fn(&SVector<f64, N>) -> SVector<f64, N> + Sync,
{
    fn rhs(&self, y: &SVector<f64, N>) -> SVector<f64, N> {
        (self.0)(y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExplicitAdaptive,
    StiffImplicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub method: Method,
    /// Record every accepted step (and derivatives for Hermite interpolation).
    pub dense_output: bool,
    pub max_steps: usize,
    /// Components reset to 0 whenever they drop below `-atol`.
    pub clamp_nonneg: Vec<usize>,
    /// Time after the start during which crossings are ignored.
    pub event_deadband: f64,
    /// Required `|g|` at a located crossing.
    pub section_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            max_step: f64::INFINITY,
            min_step: 1e-16,
            method: Method::StiffImplicit,
            dense_output: true,
            max_steps: 10_000_000,
            clamp_nonneg: Vec::new(),
            event_deadband: 1e-6,
            section_tol: 1e-10,
        }
    }
}

impl IntegratorConfig {
    pub fn explicit() -> Self {
        Self { method: Method::ExplicitAdaptive, ..Self::default() }
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol >= 1e-14) || !(self.atol > 0.0) {
            return Err(Error::Config(format!("bad tolerances rtol={} atol={}", self.rtol, self.atol)));
        }
        if !(self.min_step > 0.0 && self.min_step < self.max_step) {
            return Err(Error::Config(format!(
                "need 0 < min_step < max_step, got {} and {}",
                self.min_step, self.max_step
            )));
        }
        Ok(())
    }
}

/// Which time variable a trajectory is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeScale {
    /// Original time `T`.
    Original,
    /// Slow time `s`.
    Slow,
    /// Fast time `tau = s / eps^2`.
    Fast,
    /// Desingularized chart time.
    Chart,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub jacobian_evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<SVector<f64, N>>,
    /// Derivatives at the stored states; empty unless dense output was requested.
    pub derivs: Vec<SVector<f64, N>>,
    pub time_scale: TimeScale,
    pub stats: StepStats,
}

impl<const N: usize> Trajectory<N> {
    pub fn last(&self) -> (f64, SVector<f64, N>) {
        (*self.times.last().unwrap(), *self.states.last().unwrap())
    }

    /// Cubic Hermite interpolation between stored steps.
    pub fn interpolate(&self, t: f64) -> Option<SVector<f64, N>> {
        if self.derivs.len() != self.states.len() || self.times.is_empty() {
            return None;
        }
        let (t0, t1) = (self.times[0], *self.times.last().unwrap());
        if t < t0 || t > t1 {
            return None;
        }
        let i = match self.times.partition_point(|&ti| ti <= t) {
            0 => 0,
            k if k >= self.times.len() => self.times.len() - 2,
            k => k - 1,
        };
        if self.times.len() == 1 {
            return Some(self.states[0]);
        }
        let h = self.times[i + 1] - self.times[i];
        let th = (t - self.times[i]) / h;
        let (y0, y1) = (&self.states[i], &self.states[i + 1]);
        let (f0, f1) = (&self.derivs[i], &self.derivs[i + 1]);
        let h00 = (1.0 + 2.0 * th) * (1.0 - th) * (1.0 - th);
        let h10 = th * (1.0 - th) * (1.0 - th);
        let h01 = th * th * (3.0 - 2.0 * th);
        let h11 = th * th * (th - 1.0);
        Some(y0 * h00 + f0 * (h10 * h) + y1 * h01 + f1 * (h11 * h))
    }

    /// CSV with header `t,<names>` and 17 significant digits.
    pub fn to_csv(&self, names: &[&str]) -> String {
        let mut out = String::from("t");
        for n in names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (t, y) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t:.16e}"));
            for v in y.iter() {
                out.push_str(&format!(",{v:.16e}"));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// `g` goes from negative to nonnegative.
    Rising,
    /// `g` goes from positive to nonpositive.
    Falling,
    Both,
}

impl Direction {
    fn fires(self, g0: f64, g1: f64) -> bool {
        match self {
            Direction::Rising => g0 < 0.0 && g1 >= 0.0,
            Direction::Falling => g0 > 0.0 && g1 <= 0.0,
            Direction::Both => (g0 < 0.0 && g1 >= 0.0) || (g0 > 0.0 && g1 <= 0.0),
        }
    }
}

pub struct SectionSpec<'a, const N: usize> {
    pub g: Box<dyn Fn(&SVector<f64, N>) -> f64 + Sync + 'a>,
    pub direction: Direction,
    pub terminal: bool,
}

impl<'a, const N: usize> SectionSpec<'a, N> {
    pub fn new(g: impl Fn(&SVector<f64, N>) -> f64 + Sync + 'a, direction: Direction) -> Self {
        Self { g: Box::new(g), direction, terminal: true }
    }

    /// The hyperplane `y[index] = value`.
    pub fn coordinate(index: usize, value: f64, direction: Direction) -> Self {
        Self::new(move |y: &SVector<f64, N>| y[index] - value, direction)
    }

    pub fn non_terminal(mut self) -> Self {
        self.terminal = false;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing<const N: usize> {
    pub t: f64,
    pub state: SVector<f64, N>,
    pub section: usize,
}

/// Result of a run that may stop at a section.
#[derive(Debug, Clone)]
pub struct RunOutcome<const N: usize> {
    pub trajectory: Trajectory<N>,
    /// All crossings in order; the last one is terminal when `terminal` is set.
    pub crossings: Vec<Crossing<N>>,
    pub terminal: Option<Crossing<N>>,
}

// Dormand-Prince 5(4).
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

// RODAS3 in the standard form
// (I - h g J) k_i = h f(y + sum a_ij k_j) + h J sum g_ij k_j.
const RO_GAMMA: f64 = 0.5;
const RO_A: [[f64; 3]; 4] = [[0.0; 3], [0.0; 3], [1.0, 0.0, 0.0], [0.75, -0.25, 0.5]];
const RO_G: [[f64; 3]; 4] = [
    [0.0; 3],
    [1.0, 0.0, 0.0],
    [-0.25, -0.25, 0.0],
    [1.0 / 12.0, 1.0 / 12.0, -2.0 / 3.0],
];
const RO_B: [f64; 4] = [5.0 / 6.0, -1.0 / 6.0, -1.0 / 6.0, 0.5];
const RO_BHAT: [f64; 4] = [0.75, -0.25, 0.5, 0.0];

struct StepResult<const N: usize> {
    y: SVector<f64, N>,
    err: SVector<f64, N>,
    rhs_evals: usize,
    jac_evals: usize,
}

fn dp5_step<S: OdeSystem<N> + ?Sized, const N: usize>(
    sys: &S,
    y: &SVector<f64, N>,
    f0: &SVector<f64, N>,
    h: f64,
) -> StepResult<N> {
    let mut k = [SVector::<f64, N>::zeros(); 7];
    k[0] = *f0;
    for i in 1..7 {
        let mut yi = *y;
        for (j, kj) in k.iter().enumerate().take(i) {
            if DP_A[i][j] != 0.0 {
                yi += kj * (h * DP_A[i][j]);
            }
        }
        k[i] = sys.rhs(&yi);
    }
    let mut ynew = *y;
    for (j, kj) in k.iter().enumerate().take(6) {
        ynew += kj * (h * DP_A[6][j]);
    }
    let mut err = SVector::<f64, N>::zeros();
    for (j, kj) in k.iter().enumerate() {
        err += kj * (h * DP_E[j]);
    }
    StepResult { y: ynew, err, rhs_evals: 6, jac_evals: 0 }
}

fn rodas3_step<S: OdeSystem<N> + ?Sized, const N: usize>(
    sys: &S,
    y: &SVector<f64, N>,
    f0: &SVector<f64, N>,
    h: f64,
) -> Option<StepResult<N>> {
    let jac = sys.jacobian(y);
    let m = SMatrix::<f64, N, N>::identity() - jac * (h * RO_GAMMA);
    let lu = DMatrix::from_column_slice(N, N, m.as_slice()).lu();
    let mut k = [SVector::<f64, N>::zeros(); 4];
    let mut evals = 0;
    for i in 0..4 {
        let fi = if i == 0 || i == 1 {
            // Stages 1 and 2 share the evaluation point y.
            *f0
        } else {
            let mut yi = *y;
            for (j, kj) in k.iter().enumerate().take(i) {
                if RO_A[i][j] != 0.0 {
                    yi += kj * RO_A[i][j];
                }
            }
            evals += 1;
            sys.rhs(&yi)
        };
        let mut gsum = SVector::<f64, N>::zeros();
        for (j, kj) in k.iter().enumerate().take(i) {
            if RO_G[i][j] != 0.0 {
                gsum += kj * RO_G[i][j];
            }
        }
        let rhs = fi * h + jac * gsum * h;
        let sol = lu.solve(&DVector::from_column_slice(rhs.as_slice()))?;
        k[i] = SVector::<f64, N>::from_column_slice(sol.as_slice());
    }
    let mut ynew = *y;
    let mut err = SVector::<f64, N>::zeros();
    for i in 0..4 {
        ynew += k[i] * RO_B[i];
        err += k[i] * (RO_B[i] - RO_BHAT[i]);
    }
    Some(StepResult { y: ynew, err, rhs_evals: evals, jac_evals: 1 })
}

/// Adaptive integrator bound to one system and configuration.
pub struct Integrator<'a, S: ?Sized, const N: usize> {
    sys: &'a S,
    cfg: &'a IntegratorConfig,
}

impl<'a, S: OdeSystem<N> + ?Sized, const N: usize> Integrator<'a, S, N> {
    pub fn new(sys: &'a S, cfg: &'a IntegratorConfig) -> Self {
        Self { sys, cfg }
    }

    fn order_exponent(&self) -> f64 {
        match self.cfg.method {
            Method::ExplicitAdaptive => 1.0 / 5.0,
            Method::StiffImplicit => 1.0 / 3.0,
        }
    }

    fn raw_step(&self, y: &SVector<f64, N>, f0: &SVector<f64, N>, h: f64) -> Option<StepResult<N>> {
        match self.cfg.method {
            Method::ExplicitAdaptive => Some(dp5_step(self.sys, y, f0, h)),
            Method::StiffImplicit => rodas3_step(self.sys, y, f0, h),
        }
    }

    fn clamp(&self, y: &mut SVector<f64, N>) {
        for &i in &self.cfg.clamp_nonneg {
            if y[i] < -self.cfg.atol {
                y[i] = 0.0;
            }
        }
    }

    /// Solution after one step of length `h` from `y`, clamped.
    fn exact_substep(&self, y: &SVector<f64, N>, f0: &SVector<f64, N>, h: f64) -> SVector<f64, N> {
        if h == 0.0 {
            return *y;
        }
        let mut out = self.raw_step(y, f0, h).map(|s| s.y).unwrap_or(*y);
        self.clamp(&mut out);
        out
    }

    fn error_norm(&self, y0: &SVector<f64, N>, y1: &SVector<f64, N>, err: &SVector<f64, N>) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..N {
            let sc = self.cfg.atol + self.cfg.rtol * y0[i].abs().max(y1[i].abs());
            m = m.max((err[i] / sc).abs());
        }
        m
    }

    fn initial_step(&self, y: &SVector<f64, N>, f0: &SVector<f64, N>, span: f64) -> f64 {
        let mut d0: f64 = 0.0;
        let mut d1: f64 = 0.0;
        for i in 0..N {
            let sc = self.cfg.atol + self.cfg.rtol * y[i].abs();
            d0 = d0.max((y[i] / sc).abs());
            d1 = d1.max((f0[i] / sc).abs());
        }
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min(span).min(self.cfg.max_step).max(self.cfg.min_step)
    }

    /// Integrate from `t0` towards `t1`, stopping early at the first terminal crossing.
    pub fn run(
        &self,
        y0: SVector<f64, N>,
        t0: f64,
        t1: f64,
        sections: &[SectionSpec<'_, N>],
    ) -> Result<RunOutcome<N>> {
        self.cfg.validate()?;
        if !(t1 > t0) {
            return Err(Error::Domain(format!("need t1 > t0, got {t0} and {t1}")));
        }
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { t: t0 });
        }
        let cfg = self.cfg;
        let mut stats = StepStats::default();
        let mut t = t0;
        let mut y = y0;
        let mut f = self.sys.rhs(&y);
        stats.rhs_evals += 1;
        let mut traj = Trajectory {
            times: vec![t],
            states: vec![y],
            derivs: if cfg.dense_output { vec![f] } else { Vec::new() },
            time_scale: TimeScale::Slow,
            stats,
        };
        let mut g_prev: Vec<f64> = sections.iter().map(|s| (s.g)(&y)).collect();
        let mut crossings = Vec::new();
        let mut h = self.initial_step(&y, &f, t1 - t0);
        let exponent = self.order_exponent();

        while t < t1 {
            if stats.accepted + stats.rejected >= cfg.max_steps {
                return Err(Error::TooManySteps { t, max_steps: cfg.max_steps });
            }
            let mut last = false;
            if t + h >= t1 {
                h = t1 - t;
                last = true;
            }
            let step = self.raw_step(&y, &f, h);
            let (ynew, en) = match step {
                Some(s) => {
                    stats.rhs_evals += s.rhs_evals;
                    stats.jacobian_evals += s.jac_evals;
                    let en = self.error_norm(&y, &s.y, &s.err);
                    (s.y, en)
                }
                None => (y, f64::INFINITY),
            };
            if !en.is_finite() || en > 1.0 {
                stats.rejected += 1;
                let fac = if en.is_finite() { (0.9 * en.powf(-exponent)).max(0.2) } else { 0.2 };
                h *= fac;
                if h < cfg.min_step {
                    return Err(Error::StepSizeUnderflow { t, h });
                }
                continue;
            }
            let mut ynew = ynew;
            self.clamp(&mut ynew);
            if ynew.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { t: t + h });
            }
            let tnew = if last { t1 } else { t + h };
            stats.accepted += 1;

            // Section checks on the accepted step.
            let mut hit: Option<Crossing<N>> = None;
            let mut g_new = Vec::with_capacity(sections.len());
            for (idx, sec) in sections.iter().enumerate() {
                let g1 = (sec.g)(&ynew);
                g_new.push(g1);
                if !sec.direction.fires(g_prev[idx], g1) {
                    continue;
                }
                let c = self.locate(&y, &f, t, tnew - t, sec, idx, g_prev[idx])?;
                if c.t <= t0 + cfg.event_deadband {
                    continue;
                }
                if sec.terminal {
                    if hit.map_or(true, |h0: Crossing<N>| c.t < h0.t) {
                        hit = Some(c);
                    }
                } else {
                    crossings.push(c);
                }
            }
            if let Some(c) = hit {
                crossings.retain(|x| x.t <= c.t);
                crossings.push(c);
                traj.times.push(c.t);
                traj.states.push(c.state);
                if cfg.dense_output {
                    traj.derivs.push(self.sys.rhs(&c.state));
                }
                traj.stats = stats;
                return Ok(RunOutcome { trajectory: traj, crossings, terminal: Some(c) });
            }
            g_prev = g_new;

            let fnew = self.sys.rhs(&ynew);
            stats.rhs_evals += 1;
            t = tnew;
            y = ynew;
            f = fnew;
            if cfg.dense_output || t >= t1 {
                traj.times.push(t);
                traj.states.push(y);
                if cfg.dense_output {
                    traj.derivs.push(f);
                }
            }
            let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-exponent)).clamp(0.2, 5.0) };
            h = (h * fac).min(cfg.max_step).max(cfg.min_step);
        }
        traj.stats = stats;
        Ok(RunOutcome { trajectory: traj, crossings, terminal: None })
    }

    #[allow(clippy::too_many_arguments)]
    fn locate(
        &self,
        y: &SVector<f64, N>,
        f: &SVector<f64, N>,
        t: f64,
        h: f64,
        sec: &SectionSpec<'_, N>,
        idx: usize,
        g0: f64,
    ) -> Result<Crossing<N>> {
        let phi = |theta: f64| (sec.g)(&self.exact_substep(y, f, theta));
        let mut conv = SimpleConvergency { eps: self.cfg.section_tol * 1e-3, max_iter: 200 };
        let theta = if g0 == 0.0 {
            0.0
        } else {
            find_root_brent(0.0, h, phi, &mut conv).map_err(|e| Error::Root(format!("section refinement: {e:?}")))?
        };
        let mut state = self.exact_substep(y, f, theta);
        // Polish with a secant step if Brent stopped on the x-tolerance.
        let mut th = theta;
        for _ in 0..8 {
            let g = (sec.g)(&state);
            if g.abs() < self.cfg.section_tol {
                break;
            }
            let dt = (h * 1e-7).max(1e-14);
            let gd = (sec.g)(&self.exact_substep(y, f, th + dt));
            let slope = (gd - g) / dt;
            if slope == 0.0 || !slope.is_finite() {
                break;
            }
            th -= g / slope;
            state = self.exact_substep(y, f, th);
        }
        Ok(Crossing { t: t + th, state, section: idx })
    }
}

/// Integrate over `[t0, t1]`.
pub fn integrate<S: OdeSystem<N> + ?Sized, const N: usize>(
    sys: &S,
    state0: SVector<f64, N>,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory<N>> {
    Ok(Integrator::new(sys, cfg).run(state0, t0, t1, &[])?.trajectory)
}

/// Integrate until the first crossing of `section` within `horizon` time units.
pub fn integrate_to_section<S: OdeSystem<N> + ?Sized, const N: usize>(
    sys: &S,
    state0: SVector<f64, N>,
    section: &SectionSpec<'_, N>,
    horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<(SVector<f64, N>, f64)> {
    let mut quiet = cfg.clone();
    quiet.dense_output = false;
    let out = Integrator::new(sys, &quiet).run(state0, 0.0, horizon, std::slice::from_ref(section))?;
    match out.terminal {
        Some(c) => Ok((c.state, c.t)),
        None => Err(Error::NoCrossing { horizon }),
    }
}
