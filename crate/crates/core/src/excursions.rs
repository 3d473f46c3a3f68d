//! Excursions of `z` between nested zones.
//!
//! A trajectory is cut at the successive first exits of `z` from
//! `zone(z(tau_n))`; the pieces are the excursions. Each exit moves the level
//! by at least 1/4. Ratios of lifted functionals over complete excursions
//! reproduce time averages exactly.

use num_traits::Float;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{f_observable, EstimateWithCI, Method};
use crate::params::DerivedConsts;
use crate::sde::{SampleSink, SimConfig, Stepper, System};
use crate::stats::{linear_fit, Z95};
use crate::transforms::{reduce_theta, State};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub lo: f64,
    pub hi: f64,
}

impl Zone {
    #[inline]
    pub fn contains(&self, z: f64) -> bool {
        self.lo <= z && z <= self.hi
    }
}

/// `[-1, 1]` near zero, otherwise `[z/2, 2z]` (oriented).
pub fn zone(z: f64) -> Zone {
    if z.abs() <= 0.5 {
        Zone { lo: -1.0, hi: 1.0 }
    } else if z > 0.0 {
        Zone { lo: 0.5 * z, hi: 2.0 * z }
    } else {
        Zone { lo: 2.0 * z, hi: 0.5 * z }
    }
}

/// Stored points per excursion before interior samples are thinned.
pub const MAX_STORED: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Excursion {
    pub t_start: f64,
    pub tau: f64,
    /// `(t, theta, z)`, endpoints exact, interior thinned to at most [`MAX_STORED`] points.
    pub samples: Vec<(f64, f64, f64)>,
    pub z_start_level: f64,
    pub z_end_level: f64,
    /// Time integral of the decomposer's observable at full resolution.
    pub fhat: f64,
    pub complete: bool,
}

impl Excursion {
    pub fn zone(&self) -> Zone {
        zone(self.z_start_level)
    }
}

/// Trapezoid integral of `f` over the stored samples of `e`.
pub fn lift_functional(f: impl Fn(f64, f64) -> f64, e: &Excursion) -> f64 {
    e.samples
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (f(w[0].1, w[0].2) + f(w[1].1, w[1].2)))
        .sum()
}

/// Streaming splitter; feed `(t, theta, z)` in time order.
///
/// The observable is integrated by the trapezoid rule on each step with `F`
/// taken linear in time, and a step that crosses a zone boundary is split at
/// the linearly interpolated crossing time. Summed over excursions this is
/// exactly the trapezoid integral of the whole stream.
pub struct Decomposer<F: Fn(f64, f64) -> f64> {
    f: F,
    done: Vec<Excursion>,
    cur: Option<Open>,
    last: Option<(f64, f64, f64, f64)>,
    t_first: f64,
}

struct Open {
    t_start: f64,
    level: Zone,
    z_level: f64,
    samples: Vec<(f64, f64, f64)>,
    stride: usize,
    skipped: usize,
    fhat: f64,
}

impl Open {
    fn new(t: f64, theta: f64, z: f64) -> Self {
        Self {
            t_start: t,
            level: zone(z),
            z_level: z,
            samples: alloc::vec![(t, theta, z)],
            stride: 1,
            skipped: 0,
            fhat: 0.0,
        }
    }

    fn store(&mut self, p: (f64, f64, f64)) {
        self.skipped += 1;
        if self.skipped < self.stride {
            return;
        }
        self.skipped = 0;
        self.samples.push(p);
        if self.samples.len() >= MAX_STORED {
            // keep the first point and every other interior point
            let kept: Vec<_> = self
                .samples
                .iter()
                .enumerate()
                .filter(|(i, _)| i % 2 == 0)
                .map(|(_, p)| *p)
                .collect();
            self.samples = kept;
            self.stride *= 2;
        }
    }

    fn close(mut self, end: (f64, f64, f64), complete: bool) -> Excursion {
        if self.samples.last() != Some(&end) {
            self.samples.push(end);
        }
        Excursion {
            t_start: self.t_start,
            tau: end.0 - self.t_start,
            samples: self.samples,
            z_start_level: self.z_level,
            z_end_level: end.2,
            fhat: self.fhat,
            complete,
        }
    }
}

impl Decomposer<fn(f64, f64) -> f64> {
    /// Lifts `F = -1 + (z/2) sin 2 theta`.
    pub fn standard() -> Self {
        Self::new(f_observable)
    }
}

impl<F: Fn(f64, f64) -> f64> Decomposer<F> {
    pub fn new(f: F) -> Self {
        Self {
            f,
            done: Vec::new(),
            cur: None,
            last: None,
            t_first: f64::NAN,
        }
    }

    pub fn push_sample(&mut self, t: f64, theta: f64, z: f64) {
        let fv = (self.f)(theta, z);
        let (t0, th0, z0, f0) = match self.last {
            None => {
                self.cur = Some(Open::new(t, theta, z));
                self.last = Some((t, theta, z, fv));
                self.t_first = t;
                return;
            }
            Some(p) => p,
        };
        let dth = reduce_theta(theta - th0);
        let dt = t - t0;
        // position along the step, as a fraction
        let mut s = 0.0;
        let mut open = self.cur.take().expect("open excursion");
        loop {
            let zn = open.level;
            if zn.contains(z) {
                break;
            }
            let b = if z < zn.lo { zn.lo } else { zn.hi };
            let phi = ((z0 - b) / (z0 - z)).clamp(s, 1.0);
            open.fhat += dt * (segment(f0, fv, phi) - segment(f0, fv, s));
            let pc = (t0 + phi * dt, reduce_theta(th0 + phi * dth), b);
            self.done.push(open.close(pc, true));
            open = Open::new(pc.0, pc.1, b);
            s = phi;
        }
        open.fhat += dt * (segment(f0, fv, 1.0) - segment(f0, fv, s));
        open.store((t, theta, z));
        self.cur = Some(open);
        self.last = Some((t, theta, z, fv));
    }

    /// Complete excursions so far.
    pub fn completed(&self) -> &[Excursion] {
        &self.done
    }

    pub fn finish(mut self) -> Result<Decomposition> {
        let (t, th, z, _) = self.last.ok_or(Error::EmptyTrajectory)?;
        let tail = self.cur.take().map(|o| o.close((t, th, z), false));
        Ok(Decomposition {
            excursions: self.done,
            tail,
            t_start: self.t_first,
            t_end: t,
        })
    }
}

/// `int_0^phi (f0 + (f1 - f0) s) ds`.
#[inline]
fn segment(f0: f64, f1: f64, phi: f64) -> f64 {
    phi * f0 + 0.5 * phi * phi * (f1 - f0)
}

impl<F: Fn(f64, f64) -> f64> SampleSink for Decomposer<F> {
    /// Reads `(theta, z)` from the first two columns.
    fn push(&mut self, t: f64, c: [f64; 3]) {
        self.push_sample(t, c[0], c[1]);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// Complete excursions in time order.
    pub excursions: Vec<Excursion>,
    /// The unfinished last piece.
    pub tail: Option<Excursion>,
    pub t_start: f64,
    pub t_end: f64,
}

impl Decomposition {
    /// End of the last complete excursion.
    pub fn t_complete(&self) -> f64 {
        self.excursions.last().map_or(self.t_start, |e| e.t_start + e.tau)
    }
}

/// Splits a stored `(t, theta, z)` trajectory.
pub fn decompose(traj: &[(f64, f64, f64)]) -> Result<Decomposition> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let mut d = Decomposer::standard();
    for &(t, th, z) in traj {
        d.push_sample(t, th, z);
    }
    d.finish()
}

/// Runs a `ThetaZ` trajectory from `(0, z*)` and decomposes it after burn-in.
pub fn simulate_excursions(cfg: &SimConfig, c: &DerivedConsts, alpha: f64) -> Result<Decomposition> {
    let cfg = SimConfig {
        system: System::ThetaZ,
        ..*cfg
    };
    cfg.validate()?;
    let mut st = Stepper::new(&cfg, &State::polar(0.0, 0.0, c.z_star), c, alpha)?;
    st.run_until(cfg.t_burn, |_| {})?;
    let mut d = Decomposer::standard();
    let [_, th, z] = st.coords();
    d.push_sample(st.t(), th, z);
    st.run_until(cfg.t_final, |s| d.push_sample(s.t1, s.next[1], s.next[2]))?;
    d.finish()
}

/// Minimum number of complete excursions for the ratio estimator.
pub const MIN_EXCURSIONS: usize = 100;

/// `sum Fhat / sum tau` over complete excursions, with a block jackknife CI.
///
/// Blocks are `floor(sqrt(n))` contiguous runs of excursions, so serial
/// dependence between neighbouring excursions is absorbed.
pub fn estimate_lambda_excursion(excursions: &[Excursion]) -> Result<EstimateWithCI> {
    let done: Vec<&Excursion> = excursions.iter().filter(|e| e.complete).collect();
    let n = done.len();
    if n < MIN_EXCURSIONS {
        return Err(Error::TooFewExcursions {
            found: n,
            required: MIN_EXCURSIONS,
        });
    }
    let sf: f64 = done.iter().map(|e| e.fhat).sum();
    let st: f64 = done.iter().map(|e| e.tau).sum();
    let value = sf / st;
    let nb = (n as f64).sqrt().floor() as usize;
    let mut parts = alloc::vec![(0.0, 0.0); nb];
    for (i, e) in done.iter().enumerate() {
        let b = (i * nb / n).min(nb - 1);
        parts[b].0 += e.fhat;
        parts[b].1 += e.tau;
    }
    let loo: Vec<f64> = parts.iter().map(|(f, t)| (sf - f) / (st - t)).collect();
    let mean = loo.iter().sum::<f64>() / nb as f64;
    let var = (nb - 1) as f64 / nb as f64 * loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    Ok(EstimateWithCI {
        value,
        half_width: Z95 * var.sqrt(),
        method: Method::Excursion,
        n_samples: n as u64,
        seed: 0,
        wall_time_s: 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopTimeBucket {
    /// `|z_0|` at the bucket centre (a power of two).
    pub level: f64,
    pub n: usize,
    pub mean_tau: f64,
    /// `(E tau^k)^{1/k}`, `k = 1..4`.
    pub moments: [f64; 4],
    /// `E tau / min(1, (z_0 / alpha)^2)`.
    pub ratio: f64,
    /// `(E tau^4)^{1/4} / min(1, (z_0 / alpha)^2)`.
    pub ratio4: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopTimeReport {
    pub alpha: f64,
    pub buckets: Vec<StopTimeBucket>,
}

impl StopTimeReport {
    /// Spread `max / min` of the normalised mean over buckets with at least `min_n` excursions.
    pub fn ratio_spread(&self, min_n: usize) -> f64 {
        let r: Vec<f64> = self.buckets.iter().filter(|b| b.n >= min_n).map(|b| b.ratio).collect();
        let hi = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
        hi / lo
    }

    /// Log-log slope of `E tau` against `|z_0|` over buckets with `1 <= |z_0| <= z_max`.
    pub fn small_z_slope(&self, z_max: f64, min_n: usize) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .buckets
            .iter()
            .filter(|b| b.level >= 1.0 && b.level <= z_max && b.n >= min_n)
            .map(|b| (b.level.ln(), b.mean_tau.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        Some(linear_fit(&x, &y).0)
    }
}

/// Moments of `tau` grouped by `|z_start_level|` on a dyadic scale, levels `>= 1` only.
pub fn stop_time_stats(excursions: &[Excursion], alpha: f64) -> StopTimeReport {
    let mut buckets: Vec<(i32, Vec<f64>)> = Vec::new();
    for e in excursions.iter().filter(|e| e.complete && e.z_start_level.abs() >= 1.0) {
        let k = e.z_start_level.abs().log2().round() as i32;
        match buckets.iter_mut().find(|b| b.0 == k) {
            Some(b) => b.1.push(e.tau),
            None => buckets.push((k, alloc::vec![e.tau])),
        }
    }
    buckets.sort_by_key(|b| b.0);
    let buckets = buckets
        .into_iter()
        .map(|(k, taus)| {
            let level = (k as f64).exp2();
            let n = taus.len();
            let mut moments = [0.0; 4];
            for (p, m) in moments.iter_mut().enumerate() {
                let s = taus.iter().map(|t| t.powi(p as i32 + 1)).sum::<f64>() / n as f64;
                *m = s.powf(1.0 / (p + 1) as f64);
            }
            let scale = (level / alpha).powi(2).min(1.0);
            StopTimeBucket {
                level,
                n,
                mean_tau: moments[0],
                moments,
                ratio: moments[0] / scale,
                ratio4: moments[3] / scale,
            }
        })
        .collect();
    StopTimeReport { alpha, buckets }
}
