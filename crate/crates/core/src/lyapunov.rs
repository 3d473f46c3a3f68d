//! Lyapunov functionals built from the Poisson corrector `g` and their
//! sampled drift checks.
//!
//! Near the axis
//!
//! ```text
//! V0(r, theta, z) = e^{-kappa r} (1 - kappa g(theta, z) + delta e^{eps z^2})
//! ```
//!
//! and far from it `V1 = exp(c_bar |U|^2)` with `U` the original coordinates
//! shifted by `(0, 0, sigma + rho)`. The checks evaluate the generators on a
//! finite lattice; they sample an inequality, they do not prove it.

use num_traits::Float;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fokker_planck::{Grid2D, GridFunction, GridInterp};
use crate::params::DerivedConsts;
use crate::sde::original_params;
use crate::transforms::{apply_generator, from_polar, Generator, Partials, State};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapConstants {
    pub lambda: f64,
    pub alpha: f64,
    pub eps_alpha: f64,
    /// `alpha^2 + 2 gamma z*^2`.
    pub gamma_big: f64,
    pub kappa: f64,
    pub delta: f64,
    /// Grid sup of `(|g| + |g_z|) e^{-eps z^2 / 2}`.
    pub c_alpha: f64,
    /// `beta / (2 alpha_hat^2)`.
    pub c_bar: f64,
    /// Fitted by [`verify_drift_v0`].
    pub d: Option<f64>,
    /// Fitted by [`verify_drift_full`].
    pub c: Option<f64>,
    pub k_offset: Option<f64>,
}

/// `min(gamma / (2 Gamma), beta nu^2 sigma^3 chi^4 / (16 alpha^2))`.
pub fn eps_alpha(c: &DerivedConsts, alpha: f64) -> f64 {
    let (sigma, beta, _) = original_params(c);
    let gb = gamma_big(c, alpha);
    (c.gamma / (2.0 * gb)).min(beta * c.nu * c.nu * sigma.powi(3) * c.chi.powi(4) / (16.0 * alpha * alpha))
}

pub fn gamma_big(c: &DerivedConsts, alpha: f64) -> f64 {
    alpha * alpha + 2.0 * c.gamma * c.z_star * c.z_star
}

/// The four upper bounds on `|kappa|`.
pub fn kappa_ceilings(lambda: f64, eps: f64, gamma: f64, gb: f64, c_alpha: f64) -> [f64; 4] {
    let m = gamma.min(gb);
    [
        lambda * lambda / (64.0 * gb * gb),
        eps * m / 16.0,
        (eps * m / (16.0 * c_alpha)).powi(2),
        1.0 / c_alpha.powi(4),
    ]
}

/// Safety factor applied to the smallest ceiling.
pub const KAPPA_SAFETY: f64 = 0.5;

/// Measures `c_alpha` on the grid and picks `kappa`, `delta`.
pub fn select_constants(
    lambda: f64,
    alpha: f64,
    c: &DerivedConsts,
    g: &GridFunction,
    grid: &Grid2D,
) -> Result<LyapConstants> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(Error::ZeroLambda);
    }
    let eps = eps_alpha(c, alpha);
    let gb = gamma_big(c, alpha);
    let interp = GridInterp::new(grid, &g.values);
    let mut c_alpha: f64 = 0.0;
    for k in 0..grid.len() {
        let (i, j) = grid.coords(k);
        let z = grid.z(j);
        let v = interp.eval(grid.theta(i), z)?;
        c_alpha = c_alpha.max((v.g.abs() + v.g_z.abs()) * (-0.5 * eps * z * z).exp());
    }
    let ceil = kappa_ceilings(lambda, eps, c.gamma, gb, c_alpha);
    let mag = KAPPA_SAFETY * ceil.iter().cloned().fold(f64::INFINITY, f64::min);
    let kappa = mag.copysign(lambda);
    let alpha_hat = c.alpha_hat_from(alpha);
    let (_, beta, _) = original_params(c);
    Ok(LyapConstants {
        lambda,
        alpha,
        eps_alpha: eps,
        gamma_big: gb,
        kappa,
        delta: mag.powf(1.5),
        c_alpha,
        c_bar: beta / (2.0 * alpha_hat * alpha_hat),
        d: None,
        c: None,
        k_offset: None,
    })
}

/// `V0` and its polar partials `(f, f_r, f_theta, f_z, f_zz)`.
pub fn eval_v0(point: (f64, f64, f64), interp: &GridInterp<'_>, k: &LyapConstants) -> Result<Partials> {
    let (r, theta, z) = point;
    let gv = interp.eval(theta, z)?;
    Ok(v0_from(r, z, gv.g, gv.g_theta, gv.g_z, gv.g_zz, k))
}

#[inline]
fn v0_from(r: f64, z: f64, g: f64, g_t: f64, g_z: f64, g_zz: f64, k: &LyapConstants) -> Partials {
    let (kap, del, eps) = (k.kappa, k.delta, k.eps_alpha);
    let w = (-kap * r).exp();
    let e = (eps * z * z).exp();
    let h = 1.0 - kap * g + del * e;
    Partials {
        f: w * h,
        d1: -kap * w * h,
        d2: -kap * w * g_t,
        dz: w * (-kap * g_z + 2.0 * del * eps * z * e),
        dzz: w * (-kap * g_zz + del * (2.0 * eps + 4.0 * eps * eps * z * z) * e),
    }
}

/// Sandwich `e^{-kappa r}(1 + delta e^{eps z^2}) <= 2 V0 <= 3 e^{-kappa r}(1 + delta e^{eps z^2})`
/// at a point; returns the two slacks (both non-negative when it holds).
pub fn sandwich_slack(point: (f64, f64, f64), interp: &GridInterp<'_>, k: &LyapConstants) -> Result<(f64, f64)> {
    let (r, _, z) = point;
    let v = eval_v0(point, interp, k)?.f;
    let base = (-k.kappa * r).exp() * (1.0 + k.delta * (k.eps_alpha * z * z).exp());
    Ok((2.0 * v - base, 3.0 * base - 2.0 * v))
}

/// `(r, theta, z)` test lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub r_values: Vec<f64>,
    pub n_theta: usize,
    pub n_z: usize,
    pub z_lo: f64,
    pub z_hi: f64,
}

pub const LATTICE_SHRINK: f64 = 0.1;

impl Lattice {
    /// `r in {-1, 0, 1}`, 129 x 257 points over the grid's `z` range shrunk by 10%.
    pub fn default_for(grid: &Grid2D) -> Self {
        Self::shrunk(grid, alloc::vec![-1.0, 0.0, 1.0], 129, 257)
    }

    pub fn shrunk(grid: &Grid2D, r_values: Vec<f64>, n_theta: usize, n_z: usize) -> Self {
        let mid = 0.5 * (grid.z_lo + grid.z_hi);
        let half = 0.5 * (grid.z_hi - grid.z_lo) * (1.0 - LATTICE_SHRINK);
        Self {
            r_values,
            n_theta,
            n_z,
            z_lo: mid - half,
            z_hi: mid + half,
        }
    }

    pub fn with_z_range(mut self, z_lo: f64, z_hi: f64) -> Self {
        self.z_lo = z_lo;
        self.z_hi = z_hi;
        self
    }

    #[inline]
    pub fn theta(&self, i: usize) -> f64 {
        -FRAC_PI_2 + PI * i as f64 / self.n_theta as f64
    }

    #[inline]
    pub fn z(&self, j: usize) -> f64 {
        if self.n_z == 1 {
            return 0.5 * (self.z_lo + self.z_hi);
        }
        self.z_lo + (self.z_hi - self.z_lo) * j as f64 / (self.n_z - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.r_values.len() * self.n_theta * self.n_z
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub lattice: Lattice,
    /// Largest sampled value of the normalised drift (`L V0 / ((1 + z^2) V0)`
    /// for the near-axis check, `L V / V` over the large-`V` points for the full one).
    pub worst_margin: f64,
    pub worst_point: State,
    pub pass: bool,
    pub constants: LyapConstants,
    /// Largest relative spread of `L1 V0 / V0` across `r` at fixed `(theta, z)`.
    pub r_spread: f64,
    /// `max |d_z V0| / ((1 + |z|) V0)`.
    pub dz_bound: f64,
    /// Best `d` in `L1 V0 <= -d (1 + delta eps z^2) V0`.
    pub proof_shape_d: f64,
    /// Smallest slack of the sandwich bound over the lattice.
    pub sandwich_min_slack: f64,
    /// Near-axis region check of the cross term; full check only.
    pub cross_term_ok: Option<bool>,
}

/// Samples `L1 V0` and fits the largest `d` with `L1 V0 <= -d (1 + z^2) V0`.
pub fn verify_drift_v0(
    k: &LyapConstants,
    interp: &GridInterp<'_>,
    lattice: &Lattice,
    c: &DerivedConsts,
    alpha: f64,
) -> Result<DriftReport> {
    let mut worst = f64::NEG_INFINITY;
    let mut worst_point = State::polar(0.0, 0.0, 0.0);
    let mut proof_worst = f64::NEG_INFINITY;
    let mut r_spread: f64 = 0.0;
    let mut dz_bound: f64 = 0.0;
    let mut sandwich = f64::INFINITY;
    for j in 0..lattice.n_z {
        let z = lattice.z(j);
        for i in 0..lattice.n_theta {
            let theta = lattice.theta(i);
            let gv = interp.eval(theta, z)?;
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &r in &lattice.r_values {
                let p = v0_from(r, z, gv.g, gv.g_theta, gv.g_z, gv.g_zz, k);
                let pt = State::polar(r, theta, z);
                let l1 = apply_generator(Generator::L1, &pt, &p, c, alpha)?;
                let ratio = l1 / p.f;
                lo = lo.min(ratio);
                hi = hi.max(ratio);
                let m = ratio / (1.0 + z * z);
                if m > worst {
                    worst = m;
                    worst_point = pt;
                }
                proof_worst = proof_worst.max(ratio / (1.0 + k.delta * k.eps_alpha * z * z));
                dz_bound = dz_bound.max(p.dz.abs() / ((1.0 + z.abs()) * p.f));
                let base = (-k.kappa * r).exp() * (1.0 + k.delta * (k.eps_alpha * z * z).exp());
                sandwich = sandwich.min((2.0 * p.f - base).min(3.0 * base - 2.0 * p.f) / base);
            }
            let scale = lo.abs().max(hi.abs());
            if scale > 0.0 {
                r_spread = r_spread.max((hi - lo) / scale);
            }
        }
    }
    let d = (-worst).max(0.0);
    Ok(DriftReport {
        lattice: lattice.clone(),
        worst_margin: worst,
        worst_point,
        pass: worst < 0.0,
        constants: LyapConstants { d: Some(d), ..*k },
        r_spread,
        dz_bound,
        proof_shape_d: (-proof_worst).max(0.0),
        sandwich_min_slack: sandwich,
        cross_term_ok: None,
    })
}

/// `V1` pulled back to rescaled coordinates, with its partials in that chart.
pub fn eval_v1(x: f64, y: f64, z: f64, c: &DerivedConsts, c_bar: f64) -> Partials {
    let (sigma, _, rho) = original_params(c);
    let bx = c.chi / c.nu * x;
    let by = bx + y / (c.nu * sigma);
    let w = (c.z_star - z) / (c.chi * c.chi * sigma) - sigma - rho;
    let q = c_bar * (bx * bx + by * by + w * w);
    let v = q.exp();
    let qx = 2.0 * c_bar * (bx + by) * c.chi / c.nu;
    let qy = 2.0 * c_bar * by / (c.nu * sigma);
    let s = 1.0 / (c.chi * c.chi * sigma);
    let qz = -2.0 * c_bar * w * s;
    let qzz = 2.0 * c_bar * s * s;
    Partials {
        f: v,
        d1: qx * v,
        d2: qy * v,
        dz: qz * v,
        dzz: (qzz + qz * qz) * v,
    }
}

/// Fraction of the largest `V` values used to fit the decay rate `c`.
pub const TOP_FRACTION: f64 = 0.25;

/// Samples `L V` for `V = V0 + V1` and fits `K, c` with `L V <= K - c V`.
///
/// `c` is half the smallest decay rate `-L V / V` over the top quarter of
/// sampled `V` values and `K` the smallest offset that makes the inequality
/// hold everywhere on the lattice. `k.d` must be set by [`verify_drift_v0`]
/// for the cross-term check.
pub fn verify_drift_full(
    k: &LyapConstants,
    interp: &GridInterp<'_>,
    lattice: &Lattice,
    c: &DerivedConsts,
    alpha: f64,
) -> Result<DriftReport> {
    let mut samples: Vec<(f64, f64, State)> = Vec::with_capacity(lattice.len());
    let mut dz_bound: f64 = 0.0;
    let mut sandwich = f64::INFINITY;
    for j in 0..lattice.n_z {
        let z = lattice.z(j);
        for i in 0..lattice.n_theta {
            let theta = lattice.theta(i);
            let gv = interp.eval(theta, z)?;
            for &r in &lattice.r_values {
                let p0 = v0_from(r, z, gv.g, gv.g_theta, gv.g_z, gv.g_zz, k);
                let pt = State::polar(r, theta, z);
                let l0 = apply_generator(Generator::L, &pt, &p0, c, alpha)?;
                let (x, y) = from_polar(r, theta);
                let p1 = eval_v1(x, y, z, c, k.c_bar);
                let l1 = apply_generator(Generator::L, &State::transformed(x, y, z), &p1, c, alpha)?;
                samples.push((l0 + l1, p0.f + p1.f, pt));
                dz_bound = dz_bound.max(p0.dz.abs() / ((1.0 + z.abs()) * p0.f));
                let base = (-k.kappa * r).exp() * (1.0 + k.delta * (k.eps_alpha * z * z).exp());
                sandwich = sandwich.min((2.0 * p0.f - base).min(3.0 * base - 2.0 * p0.f) / base);
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::InvalidConfig("empty lattice".into()));
    }
    let mut vs: Vec<f64> = samples.iter().map(|s| s.1).collect();
    vs.sort_by(|a, b| a.total_cmp(b));
    let cut = vs[((1.0 - TOP_FRACTION) * (vs.len() - 1) as f64) as usize];
    let mut worst = f64::NEG_INFINITY;
    let mut worst_point = samples[0].2;
    for (lv, v, pt) in &samples {
        if *v >= cut && lv / v > worst {
            worst = lv / v;
            worst_point = *pt;
        }
    }
    let rate = 0.5 * (-worst).max(0.0);
    let k_off = samples.iter().map(|(lv, v, _)| lv + rate * v).fold(0.0f64, f64::max);
    let cross = k.d.map(|d| cross_term_check(k, interp, lattice, c, d));
    let cross_ok = match cross {
        Some(r) => Some(r?),
        None => None,
    };
    Ok(DriftReport {
        lattice: lattice.clone(),
        worst_margin: worst,
        worst_point,
        pass: worst < 0.0 && k_off.is_finite(),
        constants: LyapConstants {
            c: Some(rate),
            k_offset: Some(k_off),
            ..*k
        },
        r_spread: 0.0,
        dz_bound,
        proof_shape_d: 0.0,
        sandwich_min_slack: sandwich,
        cross_term_ok: cross_ok,
    })
}

/// On `3 x^2 + eta^2 y^2 <= d / (2 c_dz)` checks `|x (x + eta y) d_z V0| <= (d / 2)(1 + z^2) V`,
/// at the largest radius allowed at each `(theta, z)`.
fn cross_term_check(
    k: &LyapConstants,
    interp: &GridInterp<'_>,
    lattice: &Lattice,
    c: &DerivedConsts,
    d: f64,
) -> Result<bool> {
    // c_dz measured on the lattice itself
    let mut c_dz: f64 = 0.0;
    for j in 0..lattice.n_z {
        for i in 0..lattice.n_theta {
            let p = eval_v0((0.0, lattice.theta(i), lattice.z(j)), interp, k)?;
            c_dz = c_dz.max(p.dz.abs() / ((1.0 + lattice.z(j).abs()) * p.f));
        }
    }
    if d == 0.0 {
        return Ok(false);
    }
    let bound = d / (2.0 * c_dz.max(f64::MIN_POSITIVE));
    let eta = c.eta;
    for j in 0..lattice.n_z {
        let z = lattice.z(j);
        for i in 0..lattice.n_theta {
            let theta = lattice.theta(i);
            let (ux, uy) = from_polar(0.0, theta);
            let q = 3.0 * ux * ux + eta * eta * uy * uy;
            let r = 0.5 * (bound / q).ln();
            let (x, y) = (r.exp() * ux, r.exp() * uy);
            let p0 = eval_v0((r, theta, z), interp, k)?;
            let v = p0.f + eval_v1(x, y, z, c, k.c_bar).f;
            if (x * (x + eta * y) * p0.dz).abs() > 0.5 * d * (1.0 + z * z) * v * (1.0 + 1e-9) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
