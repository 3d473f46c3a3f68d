//! Numerical checks of three auxiliary estimates: the exit-time tail of an
//! unstable linear SDE, tracking of `1/a(t)` by `x' = 1 - a(t) x`, and the
//! difference of integrals along two crossings.
//!
//! Constants are measured on the sampled inputs; nothing here is a proof.

use num_traits::Float;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::NoiseStream;
use crate::stats::{linear_fit, normal_cdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Perturbation {
    /// `C = 1 - eps`, `E = -eps b sqrt(a)`.
    Adversarial,
    /// `C = 1`, `E = 0`.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpGrowthConfig {
    pub a: f64,
    pub b: f64,
    pub eps: f64,
    pub k: f64,
    pub n_max: u32,
    pub trials: u64,
    pub seed: u64,
    pub perturbation: Perturbation,
    /// Monitoring steps per unit `(1/a) log((K v 1)/eps)`.
    pub steps_per_unit: u32,
}

impl ExpGrowthConfig {
    pub fn new(a: f64, b: f64, eps: f64, k: f64) -> Self {
        Self {
            a,
            b,
            eps,
            k,
            n_max: 4,
            trials: 100_000,
            seed: 1,
            perturbation: Perturbation::Adversarial,
            steps_per_unit: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpGrowthReport {
    /// `(1/a) log((K v 1)/eps)`.
    pub t_unit: f64,
    /// `P(tau_K > N t_unit)`, `N = 1..=n_max`.
    pub tail: Vec<f64>,
    /// Sampled `P(|x(N t_unit)| < K b / sqrt(a))`, exits ignored.
    pub marginal: Vec<f64>,
    /// The same probability for the unperturbed Gaussian solution `x(t) = e^{at}(x0 + eta)`.
    pub gaussian_tail: Vec<f64>,
    /// Fitted per-`N` decay factor of the tail; `NaN` if fewer than two usable points.
    pub ratio: f64,
    pub pass: bool,
}

/// Bound on the fitted decay factor.
pub const MAX_DECAY_RATIO: f64 = 0.75;
/// Smallest number of surviving paths for a tail point to enter the fit.
const MIN_SURVIVORS: u64 = 10;

/// Simulates `dx = a x dt + E dt + b C dW` from `x0 = 0` and estimates the exit-time tail.
///
/// Steps use the exact Gaussian transition of the linear equation, so the
/// only discretisation is the discrete monitoring of `|x|`.
pub fn check_exp_growth(cfg: &ExpGrowthConfig) -> Result<ExpGrowthReport> {
    let ExpGrowthConfig { a, b, eps, k, .. } = *cfg;
    if !(a > 0.0 && b > 0.0 && eps > 0.0 && k >= 0.0) || cfg.n_max == 0 || cfg.steps_per_unit == 0 {
        return Err(Error::InvalidConfig("need a, b, eps > 0, K >= 0, n_max and steps positive".into()));
    }
    let (cc, e) = match cfg.perturbation {
        Perturbation::Adversarial => (1.0 - eps, -eps * b * a.sqrt()),
        Perturbation::None => (1.0, 0.0),
    };
    let t_unit = (k.max(1.0) / eps).ln() / a;
    let h = t_unit / cfg.steps_per_unit as f64;
    let growth = (a * h).exp();
    let shift = e / a * (growth - 1.0);
    let sd = b * cc * ((2.0 * a * h).exp_m1() / (2.0 * a)).sqrt();
    let level = k * b / a.sqrt();
    let n_steps = cfg.n_max as u64 * cfg.steps_per_unit as u64;
    let spu = cfg.steps_per_unit as u64;
    let mut survive = alloc::vec![0u64; cfg.n_max as usize];
    let mut inside = alloc::vec![0u64; cfg.n_max as usize];
    for trial in 0..cfg.trials {
        let mut rng = NoiseStream::new(cfg.seed, trial);
        let mut x: f64 = 0.0;
        let mut exited = level == 0.0;
        for step in 1..=n_steps {
            x = growth * x + shift + sd * rng.normal();
            exited |= x.abs() >= level;
            if step % spu == 0 {
                let n = (step / spu - 1) as usize;
                if !exited {
                    survive[n] += 1;
                }
                if x.abs() < level {
                    inside[n] += 1;
                }
            }
        }
    }
    let tail: Vec<f64> = survive.iter().map(|&s| s as f64 / cfg.trials as f64).collect();
    let marginal: Vec<f64> = inside.iter().map(|&s| s as f64 / cfg.trials as f64).collect();
    let gaussian_tail = (1..=cfg.n_max)
        .map(|n| {
            let t = n as f64 * t_unit;
            let s = b * ((2.0 * a * t).exp_m1() / (2.0 * a)).sqrt();
            2.0 * normal_cdf(level / s) - 1.0
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = survive
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= MIN_SURVIVORS)
        .map(|(n, &s)| ((n + 1) as f64, (s as f64 / cfg.trials as f64).ln()))
        .unzip();
    let ratio = if xs.len() >= 2 {
        linear_fit(&xs, &ys).0.exp()
    } else if xs.len() == 1 && tail.len() >= 2 {
        // the next point has fewer than MIN_SURVIVORS paths: bound the ratio by that count
        let p1 = tail[0];
        (MIN_SURVIVORS as f64 / cfg.trials as f64 / p1).min(1.0)
    } else {
        f64::NAN
    };
    let pass = tail.iter().all(|p| *p == 0.0) || ratio <= MAX_DECAY_RATIO;
    Ok(ExpGrowthReport {
        t_unit,
        tail,
        marginal,
        gaussian_tail,
        ratio,
        pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingConfig {
    pub a0: f64,
    pub k: f64,
    pub x0: f64,
    pub t_end: f64,
    /// Lower bound `f0` of the time-change factor (1 when absent).
    pub f0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingReport {
    /// `max_t (|x - x*| - |x(0) - x*(0)| e^{-a0 f0 t}) a0^2 / K`.
    pub c_measured: f64,
    /// `min_t |y - y*| / (|y(0) - y*(0)| e^{a0 f0 t / 2} / 2)`; `>= 1` when the lower bound holds.
    pub unstable_ratio: Option<f64>,
    pub final_gap: f64,
}

/// Mesh points per `1/a_max` for the preconditions and the integrator.
const MESH_PER_SCALE: f64 = 200.0;

fn check_preconditions(a: &dyn Fn(f64) -> f64, f: &dyn Fn(f64) -> f64, cfg: &TrackingConfig) -> Result<f64> {
    let (a0, k) = (cfg.a0, cfg.k);
    if !(a0 > 0.0 && k > 0.0 && cfg.t_end > 0.0 && cfg.f0 > 0.0) {
        return Err(Error::Precondition("need a0, K, t_end, f0 > 0".into()));
    }
    let coarse = 1.0 / (a0 * 50.0);
    let n = (cfg.t_end / coarse).ceil() as usize + 1;
    let vals: Vec<f64> = (0..n).map(|i| a(i as f64 * coarse)).collect();
    let a_max = vals.iter().cloned().fold(0.0, f64::max);
    if let Some(i) = vals.iter().position(|&v| v < a0 * (1.0 - 1e-12)) {
        return Err(Error::Precondition(alloc::format!("a({}) below a0", i as f64 * coarse)));
    }
    for i in 0..n {
        if f(i as f64 * coarse) < cfg.f0 * (1.0 - 1e-12) {
            return Err(Error::Precondition(alloc::format!("f({}) below f0", i as f64 * coarse)));
        }
    }
    let w = 50usize;
    for i in 0..n {
        for j in i + 1..(i + w + 1).min(n) {
            if (vals[i] - vals[j]).abs() > k * (1.0 + 1e-9) {
                return Err(Error::Precondition(alloc::format!(
                    "|a(t) - a(s)| > K near t = {}",
                    i as f64 * coarse
                )));
            }
        }
    }
    Ok(a_max)
}

fn rk4(rhs: &dyn Fn(f64, f64) -> f64, t: f64, x: f64, h: f64) -> f64 {
    let k1 = rhs(t, x);
    let k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1);
    let k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2);
    let k4 = rhs(t + h, x + h * k3);
    x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Integrates `x' = f(t)(1 - a(t) x)` and measures the constant of the tracking bound.
///
/// When `unstable_gap` is given, also integrates `y' = f(t)(1 + a(t) y)` from
/// `y*(0) + unstable_gap` and reports the growth ratio against `e^{a0 f0 t / 2} / 2`.
pub fn check_stable_tracking(
    a: &dyn Fn(f64) -> f64,
    f: &dyn Fn(f64) -> f64,
    cfg: &TrackingConfig,
    unstable_gap: Option<f64>,
) -> Result<TrackingReport> {
    let a_max = check_preconditions(a, f, cfg)?;
    let f_max = {
        let n = 1000;
        (0..=n).map(|i| f(cfg.t_end * i as f64 / n as f64)).fold(0.0, f64::max)
    };
    let h0 = 1.0 / (MESH_PER_SCALE * a_max * f_max.max(1.0));
    let steps = (cfg.t_end / h0).ceil() as usize;
    let h = cfg.t_end / steps as f64;
    let rate = cfg.a0 * cfg.f0;
    let stable = |t: f64, x: f64| f(t) * (1.0 - a(t) * x);
    let gap0 = (cfg.x0 - 1.0 / a(0.0)).abs();
    let mut x = cfg.x0;
    let mut c_measured = f64::NEG_INFINITY;
    let mut gap = gap0;
    for i in 0..steps {
        let t = i as f64 * h;
        x = rk4(&stable, t, x, h);
        let t1 = t + h;
        gap = (x - 1.0 / a(t1)).abs();
        let excess = gap - gap0 * (-rate * t1).exp();
        c_measured = c_measured.max(excess * cfg.a0 * cfg.a0 / cfg.k);
    }
    let unstable_ratio = unstable_gap.map(|g0| {
        let unstable = |t: f64, y: f64| f(t) * (1.0 + a(t) * y);
        let mut y = -1.0 / a(0.0) + g0;
        let mut worst = f64::INFINITY;
        for i in 0..steps {
            let t = i as f64 * h;
            y = rk4(&unstable, t, y, h);
            let t1 = t + h;
            let r = (y + 1.0 / a(t1)).abs() / (g0.abs() * (0.5 * rate * t1).exp() / 2.0);
            worst = worst.min(r);
        }
        worst
    });
    Ok(TrackingReport {
        c_measured: c_measured.max(0.0),
        unstable_ratio,
        final_gap: gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingReport {
    pub tau1: f64,
    pub tau2: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Mesh sizes for the sup/inf in the bound.
const THETA_MESH: usize = 65;
const TIME_MESH: usize = 65;
/// Integration steps per unit of `|b - a| / F_min`.
const CROSS_STEPS: f64 = 4000.0;

type Field<'a> = &'a dyn Fn(f64, f64) -> f64;

/// Crossing time of `theta' = F(theta, t)` from `a` to `b` and `int_0^tau G(theta, t) dt`.
fn crossing(f: Field<'_>, g: Field<'_>, a: f64, b: f64, h: f64, t_max: f64) -> Result<(f64, f64)> {
    let rhs = |t: f64, th: f64| f(th, t);
    let (mut t, mut th, mut acc) = (0.0, a, 0.0);
    while t < t_max {
        let next = rk4(&rhs, t, th, h);
        let g0 = g(th, t);
        if next >= b {
            // linear interpolation of the last step
            let phi = (b - th) / (next - th);
            let gb = g(b, t + phi * h);
            acc += 0.5 * phi * h * (g0 + gb);
            return Ok((t + phi * h, acc));
        }
        acc += 0.5 * h * (g0 + g(next, t + h));
        th = next;
        t += h;
    }
    Err(Error::NoCrossing(alloc::format!("no crossing of {b} before t = {t_max}")))
}

fn extrema(h: Field<'_>, a: f64, b: f64, tau: f64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..THETA_MESH {
        let th = a + (b - a) * i as f64 / (THETA_MESH - 1) as f64;
        for j in 0..TIME_MESH {
            let v = h(th, tau * j as f64 / (TIME_MESH - 1) as f64);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (lo, hi)
}

fn distance(h1: Field<'_>, h2: Field<'_>, a: f64, b: f64, tau1: f64, tau2: f64) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..THETA_MESH {
        let th = a + (b - a) * i as f64 / (THETA_MESH - 1) as f64;
        let v1: Vec<f64> = (0..TIME_MESH).map(|j| h1(th, tau1 * j as f64 / (TIME_MESH - 1) as f64)).collect();
        for j in 0..TIME_MESH {
            let v2 = h2(th, tau2 * j as f64 / (TIME_MESH - 1) as f64);
            for &u in &v1 {
                d = d.max((u - v2).abs());
            }
        }
    }
    d
}

/// Both sides of the crossing-difference bound for two scalar ODEs started at `a`
/// and stopped at `b > a`.
///
/// `F_i` minima, `sup |G_2|` and the distances are taken over a mesh of the
/// strip `[a, b] x [0, tau_i]`.
pub fn check_crossing_diff(
    f1: Field<'_>,
    f2: Field<'_>,
    g1: Field<'_>,
    g2: Field<'_>,
    a: f64,
    b: f64,
) -> Result<CrossingReport> {
    if !(b > a) {
        return Err(Error::Precondition("need b > a".into()));
    }
    // positivity on a provisional window, refined after the crossing times are known
    let probe = |f: Field<'_>| extrema(f, a, b, 1.0).0;
    let (p1, p2) = (probe(f1), probe(f2));
    if !(p1 > 0.0 && p2 > 0.0) {
        return Err(Error::NoCrossing("F is not uniformly positive on the strip".into()));
    }
    let run = |f: Field<'_>, g: Field<'_>, fmin: f64| {
        let scale = (b - a) / fmin;
        crossing(f, g, a, b, scale / CROSS_STEPS, 100.0 * scale)
    };
    let (tau1, i1) = run(f1, g1, p1)?;
    let (tau2, i2) = run(f2, g2, p2)?;
    let f1_min = extrema(f1, a, b, tau1).0;
    let f2_min = extrema(f2, a, b, tau2).0;
    if !(f1_min > 0.0 && f2_min > 0.0) {
        return Err(Error::NoCrossing("F is not uniformly positive on the strip".into()));
    }
    let (g2_lo, g2_hi) = extrema(g2, a, b, tau2);
    let g2_sup = g2_lo.abs().max(g2_hi.abs());
    let d_g = distance(g1, g2, a, b, tau1, tau2);
    let d_f = distance(f1, f2, a, b, tau1, tau2);
    let lhs = (i1 - i2).abs();
    let rhs = (b - a) * (d_g * f2_min + g2_sup * d_f) / (f1_min * f2_min);
    Ok(CrossingReport {
        tau1,
        tau2,
        lhs,
        rhs,
        pass: lhs <= rhs * (1.0 + 1e-9) + 1e-12,
    })
}
