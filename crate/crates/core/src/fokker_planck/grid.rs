use num_traits::Float;
use core::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::DerivedConsts;

/// Number of OU standard deviations on either side of `z*` in the default domain.
pub const DEFAULT_HALF_WIDTH_SD: f64 = 8.0;
pub const DEFAULT_N_THETA: usize = 256;
pub const DEFAULT_N_Z: usize = 512;

/// Cell-centred tensor grid on `[-pi/2, pi/2) x [z_lo, z_hi]`, periodic in `theta`.
///
/// Node `(i, j)` sits at the centre of its cell and has flat index `j * n_theta + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub n_theta: usize,
    pub n_z: usize,
    pub z_lo: f64,
    pub z_hi: f64,
}

impl Grid2D {
    pub fn new(n_theta: usize, n_z: usize, z_lo: f64, z_hi: f64) -> Result<Self> {
        if n_theta < 16 || n_z < 16 {
            return Err(Error::InvalidConfig("grid needs at least 16 cells per direction".into()));
        }
        if !(z_lo < z_hi) || !z_lo.is_finite() || !z_hi.is_finite() {
            return Err(Error::InvalidConfig("grid needs finite z_lo < z_hi".into()));
        }
        Ok(Self { n_theta, n_z, z_lo, z_hi })
    }

    /// `z* +- 8 alpha / sqrt(2 gamma)`.
    pub fn around(c: &DerivedConsts, alpha: f64, n_theta: usize, n_z: usize) -> Result<Self> {
        let w = DEFAULT_HALF_WIDTH_SD * c.ou_std(alpha);
        let g = Self::new(n_theta, n_z, c.z_star - w, c.z_star + w)?;
        if !(g.z_lo < c.z_star && c.z_star < g.z_hi) {
            return Err(Error::InvalidConfig("z* must lie inside the grid".into()));
        }
        Ok(g)
    }

    pub fn default_for(c: &DerivedConsts, alpha: f64) -> Result<Self> {
        Self::around(c, alpha, DEFAULT_N_THETA, DEFAULT_N_Z)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_theta * self.n_z
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn h_theta(&self) -> f64 {
        PI / self.n_theta as f64
    }

    #[inline]
    pub fn h_z(&self) -> f64 {
        (self.z_hi - self.z_lo) / self.n_z as f64
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.h_theta() * self.h_z()
    }

    #[inline]
    pub fn theta(&self, i: usize) -> f64 {
        -FRAC_PI_2 + (i as f64 + 0.5) * self.h_theta()
    }

    #[inline]
    pub fn z(&self, j: usize) -> f64 {
        self.z_lo + (j as f64 + 0.5) * self.h_z()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n_theta + i
    }

    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.n_theta, k / self.n_theta)
    }

    /// Node nearest to `(theta, z)`, with `theta` taken modulo `pi`.
    pub fn nearest(&self, theta: f64, z: f64) -> (usize, usize) {
        let t = crate::transforms::reduce_theta(theta);
        let i = (((t + FRAC_PI_2) / self.h_theta() - 0.5).round().max(0.0) as usize) % self.n_theta;
        let j = ((z - self.z_lo) / self.h_z() - 0.5).round().clamp(0.0, (self.n_z - 1) as f64) as usize;
        (i, j)
    }

    /// Same domain with both resolutions scaled by `k`.
    pub fn refined(&self, k: usize) -> Self {
        Self {
            n_theta: self.n_theta * k,
            n_z: self.n_z * k,
            ..*self
        }
    }
}
