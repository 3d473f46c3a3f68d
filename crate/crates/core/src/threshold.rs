//! Sign-change search for `lambda(alpha)` with noisy estimators.
//!
//! All `alpha` values here are in rescaled units; results also carry the
//! original-unit value.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{estimate_lambda_mc, heuristic_lambda, EstimateWithCI, Method};
use crate::fokker_planck::lambda_pde;
use crate::params::DerivedConsts;
use crate::sde::SimConfig;

/// Anything that can estimate `lambda` at a given `alpha`.
pub trait LambdaOracle {
    fn method(&self) -> Method;

    /// Estimate at effort `level`; each level doubles the sampling effort.
    fn estimate(&mut self, alpha: f64, level: u32) -> Result<EstimateWithCI>;
}

/// Quadrature of the Gaussian heuristic; exact at every level.
pub struct HeuristicOracle {
    pub c: DerivedConsts,
    pub quad_tol: f64,
}

impl LambdaOracle for HeuristicOracle {
    fn method(&self) -> Method {
        Method::Heuristic
    }

    fn estimate(&mut self, alpha: f64, _level: u32) -> Result<EstimateWithCI> {
        Ok(EstimateWithCI::exact(heuristic_lambda(alpha, &self.c, self.quad_tol), Method::Heuristic))
    }
}

/// Grid solve; the level is ignored (the estimate carries no sampling error).
pub struct PdeOracle {
    pub c: DerivedConsts,
    pub n_theta: usize,
    pub n_z: usize,
}

impl LambdaOracle for PdeOracle {
    fn method(&self) -> Method {
        Method::Pde
    }

    fn estimate(&mut self, alpha: f64, _level: u32) -> Result<EstimateWithCI> {
        let v = lambda_pde(&self.c, alpha, self.n_theta, self.n_z)?;
        Ok(EstimateWithCI::exact(v, Method::Pde))
    }
}

/// Sequential time-average estimator; level `l` runs `2^l` times the base window.
///
/// With `common_numbers` every `alpha` reuses the same seed and streams.
pub struct McOracle {
    pub c: DerivedConsts,
    pub cfg: SimConfig,
    pub replicas: u64,
    pub common_numbers: bool,
    calls: u64,
}

impl McOracle {
    pub fn new(c: DerivedConsts, cfg: SimConfig, replicas: u64) -> Self {
        Self {
            c,
            cfg,
            replicas,
            common_numbers: true,
            calls: 0,
        }
    }
}

/// Base config with the averaging window scaled by `2^level`.
pub fn scaled_config(cfg: &SimConfig, level: u32) -> SimConfig {
    let window = cfg.t_final - cfg.t_burn;
    SimConfig {
        t_final: cfg.t_burn + window * (1u64 << level.min(40)) as f64,
        ..*cfg
    }
}

impl LambdaOracle for McOracle {
    fn method(&self) -> Method {
        Method::Mc
    }

    fn estimate(&mut self, alpha: f64, level: u32) -> Result<EstimateWithCI> {
        let mut cfg = scaled_config(&self.cfg, level);
        if !self.common_numbers {
            cfg.stream_id += self.calls * self.replicas;
        }
        self.calls += 1;
        estimate_lambda_mc(alpha, &cfg, &self.c, self.replicas)
    }
}

/// Wraps a closure `(alpha, level) -> estimate`.
pub struct FnOracle<F: FnMut(f64, u32) -> Result<EstimateWithCI>> {
    pub method: Method,
    pub f: F,
}

impl<F: FnMut(f64, u32) -> Result<EstimateWithCI>> LambdaOracle for FnOracle<F> {
    fn method(&self) -> Method {
        self.method
    }

    fn estimate(&mut self, alpha: f64, level: u32) -> Result<EstimateWithCI> {
        (self.f)(alpha, level)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub lo: f64,
    pub hi: f64,
    /// Stop once `hi - lo <= tol`.
    pub tol: f64,
    /// Total oracle calls allowed.
    pub budget: u32,
    /// Highest effort level tried at one point.
    pub max_level: u32,
    /// Points of the initial sign scan (0 skips it).
    pub scan_points: u32,
}

impl ThresholdConfig {
    pub fn new(lo: f64, hi: f64, tol: f64) -> Self {
        Self {
            lo,
            hi,
            tol,
            budget: 200,
            max_level: 3,
            scan_points: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub alpha: f64,
    pub alpha_hat: f64,
    pub level: u32,
    pub estimate: EstimateWithCI,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub alpha_star: f64,
    pub alpha_star_hat: f64,
    pub bracket: (f64, f64),
    pub bracket_hat: (f64, f64),
    pub method: Method,
    pub evaluations: Vec<Evaluation>,
    /// Sub-intervals of the initial scan whose end signs differ.
    pub sign_changes: Vec<(f64, f64)>,
    pub converged: bool,
}

struct Trace<'a, O: LambdaOracle> {
    oracle: &'a mut O,
    c: &'a DerivedConsts,
    evals: Vec<Evaluation>,
}

impl<O: LambdaOracle> Trace<'_, O> {
    fn eval(&mut self, alpha: f64, level: u32) -> Result<EstimateWithCI> {
        let e = self.oracle.estimate(alpha, level)?;
        self.evals.push(Evaluation {
            alpha,
            alpha_hat: self.c.alpha_hat_from(alpha),
            level,
            estimate: e,
        });
        Ok(e)
    }

    /// Raises the effort until the CI excludes zero, the level cap or the budget is hit.
    fn sign(&mut self, alpha: f64, cfg: &ThresholdConfig) -> Result<Option<f64>> {
        let mut level = 0;
        loop {
            let e = self.eval(alpha, level)?;
            if let Some(s) = e.sign() {
                return Ok(Some(s));
            }
            if level >= cfg.max_level || self.evals.len() as u32 >= cfg.budget {
                return Ok(None);
            }
            level += 1;
        }
    }
}

/// CI-gated bisection for the sign change of `lambda` on `[cfg.lo, cfg.hi]`.
pub fn find_threshold<O: LambdaOracle>(
    oracle: &mut O,
    cfg: &ThresholdConfig,
    c: &DerivedConsts,
) -> Result<ThresholdResult> {
    if !(cfg.lo < cfg.hi) || !(cfg.lo > 0.0) || !cfg.hi.is_finite() {
        return Err(Error::InvalidBracket {
            lo: cfg.lo,
            hi: cfg.hi,
            reason: "need 0 < lo < hi".into(),
        });
    }
    if !(cfg.tol > 0.0) || cfg.budget < 2 {
        return Err(Error::InvalidConfig("tol must be positive and budget at least 2".into()));
    }
    let method = oracle.method();
    let mut tr = Trace {
        oracle,
        c,
        evals: Vec::new(),
    };
    let mut sign_changes = Vec::new();
    if cfg.scan_points >= 2 {
        let n = cfg.scan_points;
        let mut prev: Option<(f64, f64)> = None;
        for k in 0..n {
            let a = cfg.lo + (cfg.hi - cfg.lo) * k as f64 / (n - 1) as f64;
            let v = tr.eval(a, 0)?.value;
            if let Some((pa, pv)) = prev {
                if pv.signum() != v.signum() {
                    sign_changes.push((pa, a));
                }
            }
            prev = Some((a, v));
        }
    }
    let (mut lo, mut hi) = (cfg.lo, cfg.hi);
    let e_lo = tr.eval(lo, 0)?;
    let e_hi = tr.eval(hi, 0)?;
    if e_lo.sign() != Some(-1.0) || e_hi.sign() != Some(1.0) {
        return Err(Error::InvalidBracket {
            lo,
            hi,
            reason: alloc::format!(
                "need lambda(lo) < 0 < lambda(hi) by CI, got {:.4}+-{:.4} and {:.4}+-{:.4}",
                e_lo.value,
                e_lo.half_width,
                e_hi.value,
                e_hi.half_width
            ),
        });
    }
    let mut undecided = None;
    while hi - lo > cfg.tol && (tr.evals.len() as u32) < cfg.budget {
        let mid = 0.5 * (lo + hi);
        match tr.sign(mid, cfg)? {
            Some(s) if s < 0.0 => lo = mid,
            Some(_) => hi = mid,
            None => {
                undecided = Some(mid);
                break;
            }
        }
    }
    let converged = undecided.is_none() && hi - lo <= cfg.tol;
    let alpha_star = undecided.unwrap_or(0.5 * (lo + hi));
    Ok(ThresholdResult {
        alpha_star,
        alpha_star_hat: c.alpha_hat_from(alpha_star),
        bracket: (lo, hi),
        bracket_hat: (c.alpha_hat_from(lo), c.alpha_hat_from(hi)),
        method,
        evaluations: tr.evals,
        sign_changes,
        converged,
    })
}
