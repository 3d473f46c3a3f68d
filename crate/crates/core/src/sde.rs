//! Time stepping for the four model variants.
//!
//! All splitting schemes use exact Ornstein-Uhlenbeck transitions for the
//! linear part of the `z` equation and an explicit midpoint step for the rest,
//! arranged as half OU / drift / half OU. Every step consumes exactly two
//! normal draws, one per OU half step, whichever scheme is selected; the
//! Euler-Maruyama variant uses their normalised sum as its single increment so
//! that both schemes see the same Brownian path.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::DerivedConsts;
use crate::rng::NoiseStream;
use crate::transforms::{angular_drift, from_polar, radial_rate, reduce_theta, sigma_of, to_polar, Chart, State};

/// Magnitude beyond which a full-system coordinate counts as blown up.
pub const OVERFLOW_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum System {
    /// Original variables and time.
    OriginalFull,
    /// Rescaled variables and time.
    TransformedFull,
    /// Angle and OU driver of the linearisation; `r` is not tracked.
    ThetaZ,
    /// Linearisation with the radius.
    PolarLinear,
}

impl System {
    pub fn chart(self) -> Chart {
        match self {
            System::OriginalFull => Chart::Original,
            System::TransformedFull => Chart::Transformed,
            System::ThetaZ | System::PolarLinear => Chart::Polar,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    #[default]
    Splitting,
    EulerMaruyama,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub system: System,
    pub dt0: f64,
    pub t_burn: f64,
    pub t_final: f64,
    pub seed: u64,
    /// Replica index; selects an independent noise stream.
    pub stream_id: u64,
    /// Keep every `thin`-th step.
    pub thin: u64,
    pub adaptive: bool,
    pub scheme: Scheme,
}

pub const DEFAULT_DT0: f64 = 1e-2;

/// `max(50, 20 / gamma)`: several relaxation times of `z`.
pub fn default_burn_in(c: &DerivedConsts) -> f64 {
    (20.0 / c.gamma).max(50.0)
}

impl SimConfig {
    pub fn new(system: System, t_final: f64, seed: u64, c: &DerivedConsts) -> Self {
        Self {
            system,
            dt0: DEFAULT_DT0,
            t_burn: default_burn_in(c),
            t_final,
            seed,
            stream_id: 0,
            thin: 1,
            adaptive: true,
            scheme: Scheme::Splitting,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.dt0 > 0.0 && self.dt0 <= 0.1) {
            return bad("dt0 must lie in (0, 0.1]");
        }
        if !(self.t_burn >= 0.0) || !self.t_burn.is_finite() {
            return bad("t_burn must be finite and non-negative");
        }
        // t_final == t_burn is accepted and yields no samples
        if !(self.t_final >= self.t_burn) || !self.t_final.is_finite() {
            return bad("t_final must be finite and at least t_burn");
        }
        if self.thin == 0 {
            return bad("thin must be positive");
        }
        Ok(())
    }

    /// Step length at a point whose "size" is `m` (|z| for the linear systems).
    #[inline]
    pub fn dt_at(&self, m: f64) -> f64 {
        if self.adaptive {
            self.dt0 / (1.0 + m)
        } else {
            self.dt0
        }
    }
}

/// Precomputed exact OU transition over a fixed step.
#[derive(Debug, Clone, Copy)]
pub struct OuStep {
    pub decay: f64,
    pub noise: f64,
}

impl OuStep {
    /// Transition of `dz = -rate (z - mean) dt + amp dW` over `dt`.
    #[inline]
    pub fn new(rate: f64, amp: f64, dt: f64) -> Self {
        let decay = (-rate * dt).exp();
        let var = -(-2.0 * rate * dt).exp_m1() / (2.0 * rate);
        Self {
            decay,
            noise: amp * var.sqrt(),
        }
    }

    #[inline]
    pub fn apply(&self, z: f64, mean: f64, xi: f64) -> f64 {
        mean + (z - mean) * self.decay + self.noise * xi
    }
}

/// Exact OU transition `z -> z' ~ N(z* + (z - z*) e^{-gamma dt}, alpha^2 (1 - e^{-2 gamma dt}) / (2 gamma))`.
#[inline]
pub fn step_ou_exact(z: f64, dt: f64, xi: f64, c: &DerivedConsts, alpha: f64) -> f64 {
    OuStep::new(c.gamma, alpha, dt).apply(z, c.z_star, xi)
}

#[inline]
fn check_rejection(z: f64, dt: f64) -> Result<()> {
    let v = z.abs() * dt;
    if v > 0.5 {
        Err(Error::StepRejected(v))
    } else {
        Ok(())
    }
}

/// One splitting step of the `(theta, z)` system.
pub fn step_theta_z(
    state: (f64, f64),
    dt: f64,
    xi: (f64, f64),
    c: &DerivedConsts,
    alpha: f64,
) -> Result<(f64, f64)> {
    let (theta, z) = state;
    check_rejection(z, dt)?;
    let ou = OuStep::new(c.gamma, alpha, 0.5 * dt);
    let zm = ou.apply(z, c.z_star, xi.0);
    check_rejection(zm, dt)?;
    let th = theta_midpoint(theta, zm, dt);
    Ok((reduce_theta(th), ou.apply(zm, c.z_star, xi.1)))
}

#[inline]
fn theta_midpoint(theta: f64, z: f64, dt: f64) -> f64 {
    let half = theta + 0.5 * dt * angular_drift(theta, z);
    theta + dt * angular_drift(half, z)
}

/// Euler-Maruyama step of the `(theta, z)` system with a single increment `xi`.
pub fn step_theta_z_em(state: (f64, f64), dt: f64, xi: f64, c: &DerivedConsts, alpha: f64) -> Result<(f64, f64)> {
    let (theta, z) = state;
    check_rejection(z, dt)?;
    let th = theta + dt * angular_drift(theta, z);
    let z1 = z - c.gamma * (z - c.z_star) * dt + alpha * dt.sqrt() * xi;
    Ok((reduce_theta(th), z1))
}

/// `e^{A t}` for `A = [[0, 1], [z - 2, -2]]`, the frozen-`z` linear flow.
///
/// With `A = -I + B` and `B^2 = (z - 1) I` the exponential is
/// `e^{-t} (C I + S B)` with `C`, `S` hyperbolic or trigonometric in `sqrt|z - 1| t`.
pub fn linear_flow(z: f64, t: f64) -> [[f64; 2]; 2] {
    let w = (z - 1.0) * t * t;
    let (cc, s) = if w.abs() < 1e-8 {
        (1.0 + w / 2.0 + w * w / 24.0, t * (1.0 + w / 6.0 + w * w / 120.0))
    } else if z > 1.0 {
        let q = (z - 1.0).sqrt();
        ((q * t).cosh(), (q * t).sinh() / q)
    } else {
        let q = (1.0 - z).sqrt();
        ((q * t).cos(), (q * t).sin() / q)
    };
    let e = (-t).exp();
    [
        [e * (cc + s), e * s],
        [e * s * (z - 2.0), e * (cc - s)],
    ]
}

/// One step of the polar linearisation; returns `(r, theta, z)` with `r`
/// accumulated exactly through the frozen-`z` flow.
pub fn step_polar_linear(
    state: [f64; 3],
    dt: f64,
    xi: (f64, f64),
    c: &DerivedConsts,
    alpha: f64,
) -> Result<[f64; 3]> {
    let [r, theta, z] = state;
    check_rejection(z, dt)?;
    let ou = OuStep::new(c.gamma, alpha, 0.5 * dt);
    let zm = ou.apply(z, c.z_star, xi.0);
    check_rejection(zm, dt)?;
    let (r2, th2) = rotate_polar(theta, zm, dt)?;
    Ok([r + r2, th2, ou.apply(zm, c.z_star, xi.1)])
}

/// Radial increment and new angle after flowing the unit vector at `theta` for `dt`.
#[inline]
pub fn rotate_polar(theta: f64, z: f64, dt: f64) -> Result<(f64, f64)> {
    let (x, y) = from_polar(0.0, theta);
    let m = linear_flow(z, dt);
    to_polar(m[0][0] * x + m[0][1] * y, m[1][0] * x + m[1][1] * y)
}

/// Euler-Maruyama step of the polar linearisation.
pub fn step_polar_linear_em(state: [f64; 3], dt: f64, xi: f64, c: &DerivedConsts, alpha: f64) -> Result<[f64; 3]> {
    let [r, theta, z] = state;
    let (th, z1) = step_theta_z_em((theta, z), dt, xi, c, alpha)?;
    Ok([r + dt * radial_rate(theta, z), th, z1])
}

/// Original-variable parameters recovered from the constants: `(sigma, beta, rho)`.
pub fn original_params(c: &DerivedConsts) -> (f64, f64, f64) {
    let sigma = sigma_of(c);
    let beta = c.gamma / c.chi;
    let rho = 1.0 + (c.z_star - 2.0) / (c.chi * c.chi * sigma);
    (sigma, beta, rho)
}

/// Drift of the rescaled system without its linear OU part.
#[inline]
fn drift_transformed(s: [f64; 3], eta: f64) -> [f64; 3] {
    let [x, y, z] = s;
    [y, x * (z - 2.0) - 2.0 * y, -x * (x + eta * y)]
}

#[inline]
fn drift_original(s: [f64; 3], sigma: f64, rho: f64) -> [f64; 3] {
    let [x, y, z] = s;
    [sigma * (y - x), x * (rho - z) - y, x * y]
}

/// Full drift of the rescaled system at a point.
pub fn full_drift_transformed(s: [f64; 3], c: &DerivedConsts) -> [f64; 3] {
    let mut d = drift_transformed(s, c.eta);
    d[2] -= c.gamma * (s[2] - c.z_star);
    d
}

#[inline]
fn midpoint(s: [f64; 3], dt: f64, f: impl Fn([f64; 3]) -> [f64; 3]) -> [f64; 3] {
    let k1 = f(s);
    let h = [s[0] + 0.5 * dt * k1[0], s[1] + 0.5 * dt * k1[1], s[2] + 0.5 * dt * k1[2]];
    let k2 = f(h);
    [s[0] + dt * k2[0], s[1] + dt * k2[1], s[2] + dt * k2[2]]
}

/// One splitting step of the full system in the original or rescaled chart.
///
/// `alpha` is always the rescaled amplitude; for original-chart states the
/// step uses the matching `alpha_hat`. The axis `x = y = 0` is preserved exactly.
pub fn step_full(state: &State, dt: f64, xi: (f64, f64), c: &DerivedConsts, alpha: f64) -> Result<State> {
    let coords = match state.chart {
        Chart::Transformed => {
            let ou = OuStep::new(c.gamma, alpha, 0.5 * dt);
            let mut s = state.coords;
            s[2] = ou.apply(s[2], c.z_star, xi.0);
            s = midpoint(s, dt, |p| drift_transformed(p, c.eta));
            s[2] = ou.apply(s[2], c.z_star, xi.1);
            s
        }
        Chart::Original => {
            let (sigma, beta, rho) = original_params(c);
            let ou = OuStep::new(beta, c.alpha_hat_from(alpha), 0.5 * dt);
            let mut s = state.coords;
            s[2] = ou.apply(s[2], 0.0, xi.0);
            s = midpoint(s, dt, |p| drift_original(p, sigma, rho));
            s[2] = ou.apply(s[2], 0.0, xi.1);
            s
        }
        Chart::Polar => {
            return Err(Error::ChartMismatch {
                expected: Chart::Transformed.name(),
                found: Chart::Polar.name(),
            })
        }
    };
    Ok(State {
        chart: state.chart,
        coords,
    })
}

/// Euler-Maruyama step of the full system.
pub fn step_full_em(state: &State, dt: f64, xi: f64, c: &DerivedConsts, alpha: f64) -> Result<State> {
    let s = state.coords;
    let sq = dt.sqrt();
    let coords = match state.chart {
        Chart::Transformed => {
            let d = full_drift_transformed(s, c);
            [s[0] + dt * d[0], s[1] + dt * d[1], s[2] + dt * d[2] + alpha * sq * xi]
        }
        Chart::Original => {
            let (sigma, beta, rho) = original_params(c);
            let d = drift_original(s, sigma, rho);
            let ah = c.alpha_hat_from(alpha);
            [s[0] + dt * d[0], s[1] + dt * d[1], s[2] + dt * (d[2] - beta * s[2]) + ah * sq * xi]
        }
        Chart::Polar => {
            return Err(Error::ChartMismatch {
                expected: Chart::Transformed.name(),
                found: Chart::Polar.name(),
            })
        }
    };
    Ok(State {
        chart: state.chart,
        coords,
    })
}

/// One accepted step: times and the chart coordinates before and after.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub t0: f64,
    pub t1: f64,
    pub prev: [f64; 3],
    pub next: [f64; 3],
}

/// Single-trajectory integrator owning its state and noise stream.
///
/// Coordinates follow the system's chart; for `ThetaZ` the first slot (`r`)
/// stays at whatever value it started with.
#[derive(Debug, Clone)]
pub struct Stepper {
    system: System,
    scheme: Scheme,
    dt0: f64,
    adaptive: bool,
    consts: DerivedConsts,
    alpha: f64,
    t: f64,
    state: [f64; 3],
    steps: u64,
    noise: NoiseStream,
}

impl Stepper {
    pub fn new(cfg: &SimConfig, init: &State, c: &DerivedConsts, alpha: f64) -> Result<Self> {
        if init.chart != cfg.system.chart() {
            return Err(Error::ChartMismatch {
                expected: cfg.system.chart().name(),
                found: init.chart.name(),
            });
        }
        let mut state = init.coords;
        if cfg.system.chart() == Chart::Polar {
            state[1] = reduce_theta(state[1]);
        }
        Ok(Self {
            system: cfg.system,
            scheme: cfg.scheme,
            dt0: cfg.dt0,
            adaptive: cfg.adaptive,
            consts: *c,
            alpha,
            t: 0.0,
            state,
            steps: 0,
            noise: NoiseStream::new(cfg.seed, cfg.stream_id),
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn coords(&self) -> [f64; 3] {
        self.state
    }

    pub fn state(&self) -> State {
        State {
            chart: self.system.chart(),
            coords: self.state,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Overwrites the first coordinate; used to re-zero the radius of the polar system.
    pub fn set_r(&mut self, r: f64) {
        self.state[0] = r;
    }

    pub fn noise(&self) -> &NoiseStream {
        &self.noise
    }

    fn size(&self) -> f64 {
        let [a, b, z] = self.state;
        match self.system {
            System::ThetaZ | System::PolarLinear => z.abs(),
            System::TransformedFull | System::OriginalFull => z.abs() + a.abs() + b.abs(),
        }
    }

    /// Advances by one step, never past `t_max`.
    pub fn advance(&mut self, t_max: f64) -> Result<Step> {
        let dt = if self.adaptive {
            self.dt0 / (1.0 + self.size())
        } else {
            self.dt0
        };
        let dt = dt.min(t_max - self.t);
        let (c, a) = (&self.consts, self.alpha);
        let xi = self.noise.normal_pair();
        let xi_em = (xi.0 + xi.1) * core::f64::consts::FRAC_1_SQRT_2;
        let prev = self.state;
        let next = match (self.system, self.scheme) {
            (System::ThetaZ, Scheme::Splitting) => {
                let (th, z) = step_theta_z((prev[1], prev[2]), dt, xi, c, a)?;
                [prev[0], th, z]
            }
            (System::ThetaZ, Scheme::EulerMaruyama) => {
                let (th, z) = step_theta_z_em((prev[1], prev[2]), dt, xi_em, c, a)?;
                [prev[0], th, z]
            }
            (System::PolarLinear, Scheme::Splitting) => step_polar_linear(prev, dt, xi, c, a)?,
            (System::PolarLinear, Scheme::EulerMaruyama) => step_polar_linear_em(prev, dt, xi_em, c, a)?,
            (System::TransformedFull | System::OriginalFull, scheme) => {
                let s = State {
                    chart: self.system.chart(),
                    coords: prev,
                };
                let n = match scheme {
                    Scheme::Splitting => step_full(&s, dt, xi, c, a)?,
                    Scheme::EulerMaruyama => step_full_em(&s, dt, xi_em, c, a)?,
                };
                let m = n.coords.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if !(m <= OVERFLOW_LIMIT) {
                    return Err(Error::Overflow {
                        t: self.t + dt,
                        value: m,
                    });
                }
                n.coords
            }
        };
        let t0 = self.t;
        self.t = if dt == t_max - t0 { t_max } else { t0 + dt };
        self.state = next;
        self.steps += 1;
        Ok(Step {
            t0,
            t1: self.t,
            prev,
            next,
        })
    }

    /// Runs until `t_max`, calling `f` after every step.
    pub fn run_until(&mut self, t_max: f64, mut f: impl FnMut(&Step)) -> Result<()> {
        while self.t < t_max {
            let s = self.advance(t_max)?;
            f(&s);
        }
        Ok(())
    }
}

/// Receiver of retained samples `(t, c1, c2, c3)`.
pub trait SampleSink {
    fn push(&mut self, t: f64, c: [f64; 3]);
}

impl SampleSink for alloc::vec::Vec<(f64, [f64; 3])> {
    fn push(&mut self, t: f64, c: [f64; 3]) {
        alloc::vec::Vec::push(self, (t, c));
    }
}

/// Discards samples; only the summary is kept.
pub struct NullSink;

impl SampleSink for NullSink {
    fn push(&mut self, _: f64, _: [f64; 3]) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub final_state: State,
    pub t_final: f64,
    /// Per-column extremes over the post-burn-in samples (before thinning).
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub steps: u64,
    pub n_samples: u64,
}

/// Output columns of a step for a given system.
///
/// `ThetaZ` rows are `(theta, z, running integral of the radial rate since
/// burn-in)`, `PolarLinear` rows `(r, theta, z)`, full systems their chart coordinates.
#[inline]
fn columns(system: System, s: [f64; 3], integral: f64) -> [f64; 3] {
    match system {
        System::ThetaZ => [s[1], s[2], integral],
        _ => s,
    }
}

/// Integrates from `init` and streams thinned samples from `t_burn` on.
pub fn simulate<S: SampleSink>(
    cfg: &SimConfig,
    init: &State,
    c: &DerivedConsts,
    alpha: f64,
    sink: &mut S,
) -> Result<SimSummary> {
    cfg.validate()?;
    let mut st = Stepper::new(cfg, init, c, alpha)?;
    st.run_until(cfg.t_burn, |_| {})?;
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    let mut n_samples = 0u64;
    let mut integral = 0.0;
    let mut k = 0u64;
    let mut record = |t: f64, cols: [f64; 3], keep: bool, n: &mut u64| {
        for i in 0..3 {
            min[i] = min[i].min(cols[i]);
            max[i] = max[i].max(cols[i]);
        }
        if keep {
            sink.push(t, cols);
            *n += 1;
        }
    };
    if cfg.t_final > cfg.t_burn {
        record(st.t(), columns(cfg.system, st.coords(), 0.0), true, &mut n_samples);
    }
    let system = cfg.system;
    st.run_until(cfg.t_final, |s| {
        if system == System::ThetaZ {
            let f0 = radial_rate(s.prev[1], s.prev[2]);
            let f1 = radial_rate(s.next[1], s.next[2]);
            integral += 0.5 * (s.t1 - s.t0) * (f0 + f1);
        }
        k += 1;
        let keep = k % cfg.thin == 0;
        record(s.t1, columns(system, s.next, integral), keep, &mut n_samples);
    })?;
    Ok(SimSummary {
        final_state: st.state(),
        t_final: st.t(),
        min,
        max,
        steps: st.steps(),
        n_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{derive_constants, Params};
    use crate::transforms::{to_transformed, from_transformed};
    use alloc::vec::Vec;
    use core::f64::consts::{FRAC_PI_2, PI};

    fn consts(alpha_hat: f64) -> DerivedConsts {
        derive_constants(&Params::classic(alpha_hat)).unwrap()
    }

    #[test]
    fn ou_fixed_point_and_relaxation() {
        let c = consts(30.0);
        assert_eq!(step_ou_exact(c.z_star, 0.37, 0.0, &c, c.alpha), c.z_star);
        let z = step_ou_exact(5.0, 2.0, 1.3, &c, 0.0);
        let expect = c.z_star + (5.0 - c.z_star) * (-c.gamma * 2.0).exp();
        assert!((z - expect).abs() < 1e-14);
    }

    #[test]
    fn ou_long_step_is_stationary_law() {
        let c = consts(30.0);
        let sd = c.ou_std(c.alpha);
        let mut ns = NoiseStream::new(3, 0);
        let n = 100_000;
        let (mut m1, mut m2) = (0.0, 0.0);
        for _ in 0..n {
            let z = step_ou_exact(40.0, 200.0, ns.normal(), &c, c.alpha);
            m1 += z;
            m2 += z * z;
        }
        m1 /= n as f64;
        let var = m2 / n as f64 - m1 * m1;
        assert!((m1 - c.z_star).abs() < 4.0 * sd / (n as f64).sqrt());
        assert!((var / (sd * sd) - 1.0).abs() < 0.02);
    }

    #[test]
    fn theta_drift_examples() {
        for z in [-3.0, 0.0, 7.0] {
            assert_eq!(angular_drift(0.0, z), 1.0);
        }
        assert!(angular_drift(FRAC_PI_2, 1.0).abs() < 1e-15);
    }

    #[test]
    fn deterministic_theta_settles_on_stable_fixed_point() {
        let c = consts(0.0);
        let mut s = (0.0, c.z_star);
        for _ in 0..20_000 {
            s = step_theta_z(s, 1e-2, (0.0, 0.0), &c, 0.0).unwrap();
        }
        let theta_plus = (1.0 / c.z_star.sqrt()).asin();
        assert!((s.0 - theta_plus).abs() < 1e-6, "{} vs {}", s.0, theta_plus);
        assert_eq!(s.1, c.z_star);
    }

    #[test]
    fn rejection_rule() {
        let c = consts(30.0);
        assert!(matches!(
            step_theta_z((0.0, 100.0), 0.01, (0.0, 0.0), &c, 0.0),
            Err(Error::StepRejected(_))
        ));
        assert!(step_theta_z((0.0, 40.0), 0.01, (0.0, 0.0), &c, 0.0).is_ok());
    }

    #[test]
    fn linear_flow_matches_series() {
        // compare against a Taylor series of exp(A t), 40 terms
        for &(z, t) in &[(3.0, 0.3), (0.2, 0.7), (1.0, 0.5), (1.0 + 1e-10, 0.01), (-5.0, 0.1)] {
            let a = [[0.0, 1.0], [z - 2.0, -2.0]];
            let mut term = [[1.0, 0.0], [0.0, 1.0]];
            let mut sum = term;
            for k in 1..40 {
                let mut nt = [[0.0; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        nt[i][j] = (term[i][0] * a[0][j] + term[i][1] * a[1][j]) * t / k as f64;
                    }
                }
                term = nt;
                for i in 0..2 {
                    for j in 0..2 {
                        sum[i][j] += term[i][j];
                    }
                }
            }
            let m = linear_flow(z, t);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((m[i][j] - sum[i][j]).abs() < 1e-13, "z={z} t={t}");
                }
            }
        }
    }

    #[test]
    fn full_drift_example() {
        let c = consts(0.0);
        let d = full_drift_transformed([1.0, 0.0, 2.0], &c);
        assert_eq!(d[0], 0.0);
        assert_eq!(d[1], 0.0);
        assert!((d[2] - (-c.gamma * (2.0 - c.z_star) - 1.0)).abs() < 1e-15);
        assert!((d[2] + 1.080140).abs() < 1e-6);
    }

    #[test]
    fn axis_is_invariant() {
        let c = consts(30.0);
        let mut ns = NoiseStream::new(5, 0);
        for chart in [Chart::Transformed, Chart::Original] {
            let mut s = State { chart, coords: [0.0, 0.0, 1.0] };
            for _ in 0..1000 {
                s = step_full(&s, 0.01, ns.normal_pair(), &c, c.alpha).unwrap();
                assert_eq!((s.coords[0], s.coords[1]), (0.0, 0.0));
                s = step_full_em(&s, 0.01, ns.normal(), &c, c.alpha).unwrap();
                assert_eq!((s.coords[0], s.coords[1]), (0.0, 0.0));
            }
        }
    }

    #[test]
    fn deterministic_full_system_decays_to_origin() {
        let c = consts(0.0);
        let mut s = State::transformed(0.8, -0.3, 6.0);
        for _ in 0..100_000 {
            s = step_full(&s, 1e-2, (0.0, 0.0), &c, 0.0).unwrap();
        }
        assert!(s.coords[0].abs() < 1e-8 && s.coords[1].abs() < 1e-8);
        assert!((s.coords[2] - c.z_star).abs() < 1e-8);
    }

    #[test]
    fn original_and_transformed_charts_agree() {
        // deterministic flows must commute with the change of variables and time change
        let c = consts(0.0);
        let o0 = State::original(1.0, 2.0, 3.0);
        let mut t = to_transformed(&o0, &c).unwrap();
        let mut o = o0;
        let dt = 1e-4;
        for _ in 0..10_000 {
            t = step_full(&t, dt, (0.0, 0.0), &c, 0.0).unwrap();
            o = step_full(&o, dt * c.chi, (0.0, 0.0), &c, 0.0).unwrap();
        }
        let back = from_transformed(&t, &c).unwrap();
        for k in 0..3 {
            assert!((back.coords[k] - o.coords[k]).abs() < 1e-6, "{k}: {:?} {:?}", back, o);
        }
    }

    #[test]
    fn polar_and_theta_z_agree_on_theta() {
        let c = consts(0.0);
        let z = 3.0;
        let mut p = [0.0, 0.3, z];
        let mut q = (0.3, z);
        let dt = 1e-4;
        for _ in 0..100_000 {
            let cz = DerivedConsts { z_star: z, ..c };
            p = step_polar_linear(p, dt, (0.0, 0.0), &cz, 0.0).unwrap();
            q = step_theta_z(q, dt, (0.0, 0.0), &cz, 0.0).unwrap();
        }
        let d = reduce_theta(p[1] - q.0 + FRAC_PI_2) - FRAC_PI_2;
        assert!(d.abs() < 1e-6, "{d}");
    }

    #[test]
    fn polar_step_matches_cartesian_flow() {
        let c = consts(0.0);
        let cz = DerivedConsts { z_star: 0.4, ..c };
        let mut p = [0.0, 1.0, 0.4];
        let (mut x, mut y) = from_polar(0.0, 1.0);
        for _ in 0..500 {
            p = step_polar_linear(p, 0.01, (0.0, 0.0), &cz, 0.0).unwrap();
            let m = linear_flow(0.4, 0.01);
            (x, y) = (m[0][0] * x + m[0][1] * y, m[1][0] * x + m[1][1] * y);
        }
        let (r, th) = to_polar(x, y).unwrap();
        assert!((p[0] - r).abs() < 1e-10);
        assert!((p[1] - th).abs() < 1e-10 || (p[1] - th).abs() > PI - 1e-10);
    }

    #[test]
    fn growth_rate_with_zero_z_is_minus_one() {
        // z* = 0 with no noise freezes z at 0
        let c = DerivedConsts { z_star: 0.0, ..consts(0.0) };
        let mut p = [0.0, 0.2, 0.0];
        for _ in 0..1000 {
            p = step_polar_linear(p, 0.01, (0.0, 0.0), &c, 0.0).unwrap();
        }
        // r is the log of |(x, x + y)| which oscillates around the e^{-t} envelope
        assert!((p[0] / 10.0 + 1.0).abs() < 0.1);
    }

    #[test]
    fn simulate_is_deterministic_and_thins() {
        let c = consts(30.0);
        let mut cfg = SimConfig::new(System::ThetaZ, 60.0, 11, &c);
        cfg.t_burn = 50.0;
        cfg.thin = 10;
        let init = State::polar(0.0, 0.0, c.z_star);
        let mut a = Vec::new();
        let mut b = Vec::new();
        let sa = simulate(&cfg, &init, &c, c.alpha, &mut a).unwrap();
        let sb = simulate(&cfg, &init, &c, c.alpha, &mut b).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        assert_eq!(a[0].0, 50.0);
        assert_eq!(sa.t_final, 60.0);
        assert!(a.last().unwrap().0 <= 60.0);
        assert!(sa.n_samples as usize == a.len() && a.len() > 10);
    }

    #[test]
    fn empty_window_gives_summary_only() {
        let c = consts(30.0);
        let mut cfg = SimConfig::new(System::ThetaZ, 5.0, 1, &c);
        cfg.t_burn = 5.0;
        let mut v = Vec::new();
        let s = simulate(&cfg, &State::polar(0.0, 0.0, 0.0), &c, c.alpha, &mut v).unwrap();
        assert!(v.is_empty());
        assert_eq!(s.n_samples, 0);
        assert!(s.steps > 0);
    }

    #[test]
    fn config_validation() {
        let c = consts(30.0);
        let mut cfg = SimConfig::new(System::ThetaZ, 100.0, 1, &c);
        assert!(cfg.validate().is_ok());
        cfg.dt0 = 0.2;
        assert!(cfg.validate().is_err());
        cfg.dt0 = 0.01;
        cfg.t_final = 10.0;
        assert!(cfg.validate().is_err());
        cfg.t_final = 100.0;
        cfg.thin = 0;
        assert!(cfg.validate().is_err());
        let wrong = State::transformed(0.0, 1.0, 0.0);
        assert!(simulate(&SimConfig::new(System::ThetaZ, 100.0, 1, &c), &wrong, &c, 1.0, &mut NullSink).is_err());
    }

    #[test]
    fn theta_stays_reduced() {
        let c = consts(30.0);
        let mut cfg = SimConfig::new(System::ThetaZ, 20.0, 2, &c);
        cfg.t_burn = 0.0;
        let mut v = Vec::new();
        simulate(&cfg, &State::polar(0.0, 0.0, c.z_star), &c, c.alpha, &mut v).unwrap();
        assert!(v.iter().all(|(_, s)| (-FRAC_PI_2..FRAC_PI_2).contains(&s[0])));
    }
}
