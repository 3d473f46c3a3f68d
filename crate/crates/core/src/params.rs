//! Physical parameters and the constants of the rescaled system.

use num_traits::Float;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the original system
///
/// ```text
/// dX = sigma (Y - X) dt
/// dY = (X (rho - Z) - Y) dt
/// dZ = (-beta Z + X Y) dt + alpha_hat dW
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub sigma: f64,
    pub beta: f64,
    pub rho: f64,
    /// Noise amplitude in the original variables.
    pub alpha_hat: f64,
}

impl Params {
    pub const fn new(sigma: f64, beta: f64, rho: f64, alpha_hat: f64) -> Self {
        Self {
            sigma,
            beta,
            rho,
            alpha_hat,
        }
    }

    /// The classical `sigma = 10`, `beta = 8/3` with `rho = 1/2`.
    pub const fn classic(alpha_hat: f64) -> Self {
        Self::new(10.0, 8.0 / 3.0, 0.5, alpha_hat)
    }

    pub fn with_alpha_hat(self, alpha_hat: f64) -> Self {
        Self { alpha_hat, ..self }
    }
}

/// One violated parameter invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, field: &'static str, message: String) {
        self.violations.push(Violation { field, message });
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            return Ok(());
        }
        let joined: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.field, v.message))
            .collect();
        Err(Error::InvalidParameter(joined.join("; ")))
    }
}

/// Lists every violated invariant; an empty report means the parameters are usable.
pub fn validate_params(p: &Params) -> ValidationReport {
    let mut report = ValidationReport::default();
    let fields = [
        ("sigma", p.sigma),
        ("beta", p.beta),
        ("rho", p.rho),
        ("alpha_hat", p.alpha_hat),
    ];
    for (name, v) in fields {
        if !v.is_finite() {
            report.push(name, format!("{name} must be finite, got {v}"));
        }
    }
    if !(p.sigma > 0.0) {
        report.push("sigma", format!("sigma must be positive, got {}", p.sigma));
    }
    if !(p.beta > 0.0) {
        report.push("beta", format!("beta must be positive, got {}", p.beta));
    }
    if !(p.alpha_hat >= 0.0) {
        report.push(
            "alpha_hat",
            format!("alpha_hat must be non-negative, got {}", p.alpha_hat),
        );
    }
    report
}

/// Constants of the rescaled system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConsts {
    pub chi: f64,
    pub eta: f64,
    pub gamma: f64,
    pub nu: f64,
    /// Noise amplitude in the rescaled variables.
    pub alpha: f64,
    pub z_star: f64,
}

impl DerivedConsts {
    /// Factor `nu * sqrt(sigma)` converting `alpha_hat` into `alpha`.
    pub fn alpha_per_alpha_hat(&self) -> f64 {
        // nu^2 = chi^5 sigma, so sigma = nu^2 / chi^5.
        self.nu * (self.nu * self.nu / self.chi.powi(5)).sqrt()
    }

    pub fn alpha_from_hat(&self, alpha_hat: f64) -> f64 {
        alpha_hat * self.alpha_per_alpha_hat()
    }

    pub fn alpha_hat_from(&self, alpha: f64) -> f64 {
        alpha / self.alpha_per_alpha_hat()
    }

    /// Standard deviation `alpha / sqrt(2 gamma)` of the stationary law of `z`.
    pub fn ou_std(&self, alpha: f64) -> f64 {
        alpha / (2.0 * self.gamma).sqrt()
    }
}

/// Evaluates `chi, eta, gamma, nu, alpha, z_star` from the original parameters.
pub fn derive_constants(p: &Params) -> Result<DerivedConsts> {
    if !(p.sigma > 0.0) || !p.sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {}",
            p.sigma
        )));
    }
    if !(p.beta > 0.0) || !p.beta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "beta must be positive, got {}",
            p.beta
        )));
    }
    let chi = 2.0 / (1.0 + p.sigma);
    let eta = (1.0 + p.sigma) / (2.0 * p.sigma);
    let gamma = chi * p.beta;
    let nu = (chi.powi(5) * p.sigma).sqrt();
    let alpha = nu * p.sigma.sqrt() * p.alpha_hat;
    let z_star = 2.0 + chi * chi * p.sigma * (p.rho - 1.0);
    Ok(DerivedConsts {
        chi,
        eta,
        gamma,
        nu,
        alpha,
        z_star,
    })
}

/// Validated parameters together with their derived constants.
///
/// `alpha` is the rescaled noise amplitude used by every integrator; it can be
/// overridden independently of `params.alpha_hat` via [`Model::with_alpha`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub params: Params,
    pub consts: DerivedConsts,
}

impl Model {
    pub fn new(params: Params) -> Result<Self> {
        validate_params(&params).into_result()?;
        let consts = derive_constants(&params)?;
        Ok(Self { params, consts })
    }

    pub fn alpha(&self) -> f64 {
        self.consts.alpha
    }

    pub fn alpha_hat(&self) -> f64 {
        self.params.alpha_hat
    }

    /// Same system with rescaled noise amplitude `alpha`.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let alpha_hat = self.consts.alpha_hat_from(alpha);
        Self::new(self.params.with_alpha_hat(alpha_hat)).map(|mut m| {
            // keep the caller's alpha bit-exact rather than the round trip
            m.consts.alpha = alpha;
            m
        })
    }

    pub fn with_alpha_hat(&self, alpha_hat: f64) -> Result<Self> {
        Self::new(self.params.with_alpha_hat(alpha_hat))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn classic() -> DerivedConsts {
        derive_constants(&Params::classic(0.0)).unwrap()
    }

    #[test]
    fn classic_constants() {
        let c = classic();
        assert!((c.chi - 2.0 / 11.0).abs() < 1e-15);
        assert!((c.eta - 0.55).abs() < 1e-15);
        assert!((c.gamma - 16.0 / 33.0).abs() < 1e-15);
        assert!((c.nu - 0.0445752).abs() < 1e-7);
        assert!((c.z_star - 1.834711).abs() < 1e-6);
    }

    #[test]
    fn rho_one_gives_z_star_two() {
        let c = derive_constants(&Params::new(10.0, 8.0 / 3.0, 1.0, 1.0)).unwrap();
        assert_eq!(c.z_star, 2.0);
    }

    #[test]
    fn alpha_from_alpha_hat() {
        let c = derive_constants(&Params::classic(27.7)).unwrap();
        assert!((c.alpha - 3.9046).abs() < 1e-4);
        assert!((c.alpha_from_hat(27.7) - c.alpha).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_positive_sigma_and_beta() {
        assert!(derive_constants(&Params::new(-1.0, 8.0 / 3.0, 0.5, 1.0)).is_err());
        assert!(derive_constants(&Params::new(10.0, 0.0, 0.5, 1.0)).is_err());
    }

    #[test]
    fn validation_reports() {
        assert!(validate_params(&Params::new(10.0, 8.0 / 3.0, 0.5, 30.0)).is_ok());
        assert!(validate_params(&Params::new(10.0, 8.0 / 3.0, 0.5, 0.0)).is_ok());
        let r = validate_params(&Params::new(-1.0, 8.0 / 3.0, 0.5, 1.0));
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].field, "sigma");
        assert!(r.violations[0].message.contains("sigma must be positive"));
        let r = validate_params(&Params::new(-1.0, -2.0, f64::NAN, -1.0));
        let fields: Vec<_> = r.violations.iter().map(|v| v.field).collect();
        assert!(fields.contains(&"sigma"));
        assert!(fields.contains(&"beta"));
        assert!(fields.contains(&"rho"));
        assert!(fields.contains(&"alpha_hat"));
    }

    proptest! {
        #[test]
        fn derivation_is_pure_and_invertible(
            sigma in 0.01f64..100.0,
            beta in 0.01f64..20.0,
            rho in -10.0f64..10.0,
            alpha_hat in 0.0f64..200.0,
        ) {
            let p = Params::new(sigma, beta, rho, alpha_hat);
            let a = derive_constants(&p).unwrap();
            let b = derive_constants(&p).unwrap();
            prop_assert_eq!(a.alpha.to_bits(), b.alpha.to_bits());
            prop_assert_eq!(a.z_star.to_bits(), b.z_star.to_bits());
            prop_assert!(a.gamma > 0.0 && a.nu > 0.0);
            let back = a.alpha / (a.nu * sigma.sqrt());
            prop_assert!((back - alpha_hat).abs() <= 1e-12 * alpha_hat.max(1.0));
            prop_assert!((a.alpha_hat_from(a.alpha) - alpha_hat).abs() <= 1e-12 * alpha_hat.max(1.0));
        }
    }
}
