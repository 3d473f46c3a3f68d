//! Estimators of the stability exponent
//!
//! ```text
//! lambda = integral of F(theta, z) = -1 + (z / 2) sin(2 theta)
//! ```
//!
//! against the stationary law of the `(theta, z)` process.
//!
//! The Monte Carlo and growth estimators are split into a per-replica kernel
//! ([`mc_replica`], [`growth_replica`]) and a reduction ([`finish_estimate`]) so that
//! callers can run replicas on whatever executor they like; the sequential
//! drivers here reduce in replica order, as must any parallel driver.

use num_traits::Float;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::DerivedConsts;
use crate::quadrature::adaptive_simpson_panels;
use crate::sde::{SimConfig, Stepper, System};
use crate::stats::{batch_means, combine_replicas, normal_pdf, Z95};
use crate::transforms::{radial_rate, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mc,
    Growth,
    Pde,
    Heuristic,
    AsymptoticSmall,
    AsymptoticLarge,
    Excursion,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mc => "mc",
            Method::Growth => "growth",
            Method::Pde => "pde",
            Method::Heuristic => "heuristic",
            Method::AsymptoticSmall => "asymptotic_small",
            Method::AsymptoticLarge => "asymptotic_large",
            Method::Excursion => "excursion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub value: f64,
    /// 95% half-width; zero for deterministic methods.
    pub half_width: f64,
    pub method: Method,
    pub n_samples: u64,
    pub seed: u64,
    pub wall_time_s: f64,
}

impl EstimateWithCI {
    pub fn exact(value: f64, method: Method) -> Self {
        Self {
            value,
            half_width: 0.0,
            method,
            n_samples: 0,
            seed: 0,
            wall_time_s: 0.0,
        }
    }

    pub fn lo(&self) -> f64 {
        self.value - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.value + self.half_width
    }

    /// `Some(sign)` when the interval excludes zero.
    pub fn sign(&self) -> Option<f64> {
        if self.lo() > 0.0 {
            Some(1.0)
        } else if self.hi() < 0.0 {
            Some(-1.0)
        } else {
            None
        }
    }

    pub fn overlaps(&self, other: &Self) -> bool {
        (self.value - other.value).abs() <= self.half_width + other.half_width
    }
}

/// Output of one replica: the time average and its batch-means variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicaStats {
    pub mean: f64,
    pub var_of_mean: f64,
    pub steps: u64,
    /// Averaging window length.
    pub time: f64,
}

/// The integrand `F(theta, z) = -1 + (z / 2) sin(2 theta)`.
#[inline]
pub fn f_observable(theta: f64, z: f64) -> f64 {
    radial_rate(theta, z)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(alloc::format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    Ok(())
}

/// Unit-time block averages of `F` along one `(theta, z)` trajectory after burn-in.
///
/// Returns the exact window average, the block values and the step count.
fn theta_z_blocks(cfg: &SimConfig, c: &DerivedConsts, alpha: f64) -> Result<(f64, Vec<f64>, u64)> {
    let cfg = SimConfig {
        system: System::ThetaZ,
        ..*cfg
    };
    cfg.validate()?;
    let mut st = Stepper::new(&cfg, &State::polar(0.0, 0.0, c.z_star), c, alpha)?;
    st.run_until(cfg.t_burn, |_| {})?;
    let window = cfg.t_final - cfg.t_burn;
    let mut blocks = Vec::with_capacity(window as usize + 1);
    let mut total = 0.0;
    let mut acc = 0.0;
    let mut k = 1u64;
    let mut edge = (cfg.t_burn + 1.0).min(cfg.t_final);
    let [_, th, z] = st.coords();
    let mut f_prev = f_observable(th, z);
    while st.t() < cfg.t_final {
        let s = st.advance(edge)?;
        let f1 = f_observable(s.next[1], s.next[2]);
        acc += 0.5 * (s.t1 - s.t0) * (f_prev + f1);
        f_prev = f1;
        if s.t1 >= edge {
            if edge == cfg.t_burn + k as f64 {
                blocks.push(acc);
            }
            total += acc;
            acc = 0.0;
            k += 1;
            edge = (cfg.t_burn + k as f64).min(cfg.t_final);
        }
    }
    let mean = if window > 0.0 { total / window } else { f64::NAN };
    Ok((mean, blocks, st.steps()))
}

/// Ergodic average of `F` along one `ThetaZ` trajectory (replica `cfg.stream_id`).
pub fn mc_replica(cfg: &SimConfig, c: &DerivedConsts, alpha: f64) -> Result<ReplicaStats> {
    check_alpha(alpha)?;
    let (mean, blocks, steps) = theta_z_blocks(cfg, c, alpha)?;
    Ok(ReplicaStats {
        mean,
        var_of_mean: batch_means(&blocks).1,
        steps,
        time: cfg.t_final - cfg.t_burn,
    })
}

/// Radius beyond which the growth estimator folds `r` into an offset.
pub const R_RESET: f64 = 700.0;

/// Average radial growth rate along one `PolarLinear` trajectory.
pub fn growth_replica(cfg: &SimConfig, c: &DerivedConsts, alpha: f64) -> Result<ReplicaStats> {
    check_alpha(alpha)?;
    let cfg = SimConfig {
        system: System::PolarLinear,
        ..*cfg
    };
    cfg.validate()?;
    let mut st = Stepper::new(&cfg, &State::polar(0.0, 0.0, c.z_star), c, alpha)?;
    st.run_until(cfg.t_burn, |_| {})?;
    st.set_r(0.0);
    let window = cfg.t_final - cfg.t_burn;
    let mut blocks = Vec::with_capacity(window as usize + 1);
    let mut offset = 0.0;
    let mut block_start = 0.0;
    let mut k = 1u64;
    let mut edge = (cfg.t_burn + 1.0).min(cfg.t_final);
    while st.t() < cfg.t_final {
        let s = st.advance(edge)?;
        let r = s.next[0];
        if r.abs() > R_RESET {
            offset += r;
            block_start -= r;
            st.set_r(0.0);
        }
        if s.t1 >= edge {
            let r_now = st.coords()[0];
            if edge == cfg.t_burn + k as f64 {
                blocks.push(r_now - block_start);
            }
            block_start = r_now;
            k += 1;
            edge = (cfg.t_burn + k as f64).min(cfg.t_final);
        }
    }
    let total = offset + st.coords()[0];
    Ok(ReplicaStats {
        mean: if window > 0.0 { total / window } else { f64::NAN },
        var_of_mean: batch_means(&blocks).1,
        steps: st.steps(),
        time: window,
    })
}

/// Reduces replica results in the given (replica) order.
pub fn finish_estimate(method: Method, parts: &[ReplicaStats], seed: u64) -> EstimateWithCI {
    let pairs: Vec<(f64, f64)> = parts.iter().map(|p| (p.mean, p.var_of_mean)).collect();
    let (value, var) = combine_replicas(&pairs);
    EstimateWithCI {
        value,
        half_width: Z95 * var.sqrt(),
        method,
        n_samples: parts.iter().map(|p| p.steps).sum(),
        seed,
        wall_time_s: 0.0,
    }
}

fn run_replicas(
    method: Method,
    cfg: &SimConfig,
    replicas: u64,
    kernel: impl Fn(&SimConfig) -> Result<ReplicaStats>,
) -> Result<EstimateWithCI> {
    if replicas == 0 {
        return Err(Error::InvalidConfig("replicas must be at least 1".into()));
    }
    let parts = (0..replicas)
        .map(|i| {
            kernel(&SimConfig {
                stream_id: cfg.stream_id + i,
                ..*cfg
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish_estimate(method, &parts, cfg.seed))
}

/// Time average of `F` over `replicas` independent trajectories, run sequentially.
pub fn estimate_lambda_mc(alpha: f64, cfg: &SimConfig, c: &DerivedConsts, replicas: u64) -> Result<EstimateWithCI> {
    run_replicas(Method::Mc, cfg, replicas, |k| mc_replica(k, c, alpha))
}

/// Radial growth rate over `replicas` independent trajectories, run sequentially.
pub fn estimate_lambda_growth(alpha: f64, cfg: &SimConfig, c: &DerivedConsts, replicas: u64) -> Result<EstimateWithCI> {
    run_replicas(Method::Growth, cfg, replicas, |k| growth_replica(k, c, alpha))
}

/// Frozen-`z` growth rate `-1 + sqrt(z - 1) 1{z > 1}`.
#[inline]
pub fn lambda_plus(z: f64) -> f64 {
    if z > 1.0 {
        -1.0 + (z - 1.0).sqrt()
    } else {
        -1.0
    }
}

/// `E[lambda_plus(z)]` for `z ~ N(z*, alpha^2 / (2 gamma))`.
pub fn heuristic_lambda(alpha: f64, c: &DerivedConsts, quad_tol: f64) -> f64 {
    let sd = c.ou_std(alpha);
    if !(sd > 0.0) {
        return lambda_plus(c.z_star);
    }
    // only the part above the fold contributes beyond the constant -1
    let kink = (1.0 - c.z_star) / sd;
    let (lo, hi) = (-10.0, 10.0);
    if kink >= hi {
        return -1.0;
    }
    let f = |u: f64| {
        let z = c.z_star + sd * u;
        if z > 1.0 {
            (z - 1.0).sqrt() * normal_pdf(u)
        } else {
            0.0
        }
    };
    -1.0 + adaptive_simpson_panels(&f, &[kink.max(lo), hi], quad_tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Small,
    Large,
}

/// `Gamma(3/4) / (2 gamma^{1/4} sqrt(pi))`, the limit of `lambda / sqrt(alpha)`.
pub fn large_alpha_constant(c: &DerivedConsts) -> f64 {
    libm::tgamma(0.75) / (2.0 * c.gamma.powf(0.25) * PI.sqrt())
}

pub fn asymptotic_lambda(alpha: f64, c: &DerivedConsts, regime: Regime) -> f64 {
    match regime {
        Regime::Small => lambda_plus(c.z_star),
        Regime::Large => alpha.sqrt() * large_alpha_constant(c),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{derive_constants, Params};
    use crate::sde::Scheme;

    fn consts(alpha_hat: f64) -> DerivedConsts {
        derive_constants(&Params::classic(alpha_hat)).unwrap()
    }

    #[test]
    fn asymptotics() {
        let c = consts(0.0);
        assert!((asymptotic_lambda(0.0, &c, Regime::Small) + 0.086375).abs() < 1e-6);
        let c3 = derive_constants(&Params::new(10.0, 8.0 / 3.0, -3.0, 0.0)).unwrap();
        assert!((c3.z_star - 0.677686).abs() < 1e-6);
        assert_eq!(asymptotic_lambda(0.0, &c3, Regime::Small), -1.0);
        // Gamma(3/4) = 1.2254167024651776
        let k = 1.2254167024651776 / (2.0 * (16.0f64 / 33.0).powf(0.25) * PI.sqrt());
        assert!((asymptotic_lambda(1.0, &c, Regime::Large) - k).abs() < 1e-14);
        assert!((k - 0.41428).abs() < 1e-4);
    }

    #[test]
    fn heuristic_limits() {
        let c = consts(0.0);
        assert!((heuristic_lambda(0.0, &c, 1e-8) + 0.086375).abs() < 1e-6);
        let c3 = derive_constants(&Params::new(10.0, 8.0 / 3.0, -3.0, 0.0)).unwrap();
        assert_eq!(heuristic_lambda(0.0, &c3, 1e-8), -1.0);
        // tiny noise approaches the frozen value
        assert!((heuristic_lambda(1e-4, &c, 1e-10) + 0.086375).abs() < 1e-5);
    }

    #[test]
    fn heuristic_matches_independent_sum() {
        // plain midpoint rule on a fine grid in z as the oracle
        let c = consts(27.04);
        let sd = c.ou_std(c.alpha);
        let n = 400_000;
        let (a, b) = (c.z_star - 12.0 * sd, c.z_star + 12.0 * sd);
        let h = (b - a) / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            let z = a + (i as f64 + 0.5) * h;
            s += lambda_plus(z) * normal_pdf((z - c.z_star) / sd) / sd * h;
        }
        let v = heuristic_lambda(c.alpha, &c, 1e-10);
        assert!((v - s).abs() < 1e-7, "{v} {s}");
        assert!(v.abs() < 2e-3);
    }

    #[test]
    fn estimate_ci_helpers() {
        let e = EstimateWithCI { value: 1.0, half_width: 0.5, method: Method::Mc, n_samples: 1, seed: 0, wall_time_s: 0.0 };
        assert_eq!(e.sign(), Some(1.0));
        let e2 = EstimateWithCI { value: 0.2, ..e };
        assert_eq!(e2.sign(), None);
        assert!(e.overlaps(&e2));
        assert_eq!(EstimateWithCI::exact(-0.3, Method::Heuristic).sign(), Some(-1.0));
    }

    #[test]
    fn growth_without_noise_tracks_fixed_point() {
        // alpha tiny: lambda -> sqrt(z* - 1) - 1
        let c = consts(0.0);
        let mut cfg = SimConfig::new(System::PolarLinear, 2050.0, 1, &c);
        cfg.t_burn = 50.0;
        let e = estimate_lambda_growth(1e-6, &cfg, &c, 1).unwrap();
        assert!((e.value - (c.z_star - 1.0).sqrt() + 1.0).abs() < 1e-3, "{}", e.value);
        let m = estimate_lambda_mc(1e-6, &cfg, &c, 1).unwrap();
        assert!((m.value - e.value).abs() < 1e-3);
    }

    #[test]
    fn growth_with_frozen_zero_z_is_minus_one() {
        let c = DerivedConsts { z_star: 0.0, ..consts(0.0) };
        let mut cfg = SimConfig::new(System::PolarLinear, 1050.0, 1, &c);
        cfg.t_burn = 50.0;
        let e = estimate_lambda_growth(1e-12, &cfg, &c, 1).unwrap();
        assert!((e.value + 1.0).abs() < 2e-3, "{}", e.value);
    }

    #[test]
    fn growth_reset_keeps_total() {
        // strongly negative lambda drives r far beyond the reset radius
        let c = DerivedConsts { z_star: 0.0, ..consts(0.0) };
        let mut cfg = SimConfig::new(System::PolarLinear, 2050.0, 1, &c);
        cfg.t_burn = 50.0;
        let r = growth_replica(&cfg, &c, 1e-12).unwrap();
        assert!((r.mean + 1.0).abs() < 1e-3);
    }

    #[test]
    fn mc_and_growth_agree_subcritical() {
        let c = consts(10.0);
        let mut cfg = SimConfig::new(System::ThetaZ, 4050.0, 7, &c);
        cfg.t_burn = 50.0;
        let m = estimate_lambda_mc(c.alpha, &cfg, &c, 2).unwrap();
        let g = estimate_lambda_growth(c.alpha, &cfg, &c, 2).unwrap();
        assert!(m.value < 0.0 && g.value < 0.0);
        assert!((m.value - g.value).abs() <= m.half_width + g.half_width, "{m:?} {g:?}");
    }

    #[test]
    fn em_scheme_is_close() {
        let c = consts(10.0);
        let mut cfg = SimConfig::new(System::ThetaZ, 2050.0, 7, &c);
        cfg.t_burn = 50.0;
        let a = estimate_lambda_mc(c.alpha, &cfg, &c, 1).unwrap();
        cfg.scheme = Scheme::EulerMaruyama;
        cfg.dt0 = 2e-3;
        let b = estimate_lambda_mc(c.alpha, &cfg, &c, 1).unwrap();
        assert!((a.value - b.value).abs() < 0.05, "{a:?} {b:?}");
    }

    #[test]
    fn reproducible() {
        let c = consts(30.0);
        let mut cfg = SimConfig::new(System::ThetaZ, 300.0, 3, &c);
        cfg.t_burn = 50.0;
        let a = estimate_lambda_mc(c.alpha, &cfg, &c, 2).unwrap();
        let b = estimate_lambda_mc(c.alpha, &cfg, &c, 2).unwrap();
        assert_eq!(a, b);
        assert!(estimate_lambda_mc(0.0, &cfg, &c, 2).is_err());
        assert!(estimate_lambda_mc(1.0, &cfg, &c, 0).is_err());
    }
}
