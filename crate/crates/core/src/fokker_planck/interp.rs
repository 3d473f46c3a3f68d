//! Piecewise-cubic (Catmull-Rom) interpolation of nodal grid values.


use super::grid::Grid2D;
use num_traits::Float;
use crate::error::{Error, Result};
use crate::transforms::reduce_theta;

/// Value and first two `z` derivatives of the interpolant, plus the `theta`
/// derivative from a centred difference of the interpolant.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InterpValue {
    pub g: f64,
    pub g_theta: f64,
    pub g_z: f64,
    pub g_zz: f64,
}

/// Catmull-Rom weights for value, first and second derivative at `t` in `[0, 1]`.
#[inline]
fn weights(t: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
    let (t2, t3) = (t * t, t * t * t);
    let v = [
        0.5 * (-t + 2.0 * t2 - t3),
        0.5 * (2.0 - 5.0 * t2 + 3.0 * t3),
        0.5 * (t + 4.0 * t2 - 3.0 * t3),
        0.5 * (-t2 + t3),
    ];
    let d = [
        0.5 * (-1.0 + 4.0 * t - 3.0 * t2),
        0.5 * (-10.0 * t + 9.0 * t2),
        0.5 * (1.0 + 8.0 * t - 9.0 * t2),
        0.5 * (-2.0 * t + 3.0 * t2),
    ];
    let dd = [
        0.5 * (4.0 - 6.0 * t),
        0.5 * (-10.0 + 18.0 * t),
        0.5 * (8.0 - 18.0 * t),
        0.5 * (-2.0 + 6.0 * t),
    ];
    (v, d, dd)
}

/// Interpolator over nodal values laid out as in [`Grid2D`].
///
/// The `z` stencil is clamped at the ends by linear extrapolation of ghost
/// nodes, so the interpolant is defined between the first and last node row.
#[derive(Debug, Clone, Copy)]
pub struct GridInterp<'a> {
    grid: &'a Grid2D,
    values: &'a [f64],
}

impl<'a> GridInterp<'a> {
    pub fn new(grid: &'a Grid2D, values: &'a [f64]) -> Self {
        assert_eq!(grid.len(), values.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        self.grid
    }

    /// `z` range covered by node rows.
    pub fn z_range(&self) -> (f64, f64) {
        (self.grid.z(0), self.grid.z(self.grid.n_z - 1))
    }

    #[inline]
    fn node(&self, i: isize, j: isize) -> f64 {
        let g = self.grid;
        let nt = g.n_theta as isize;
        let i = i.rem_euclid(nt) as usize;
        let nz = g.n_z as isize;
        if j < 0 {
            2.0 * self.node(i as isize, 0) - self.node(i as isize, 1)
        } else if j >= nz {
            2.0 * self.node(i as isize, nz - 1) - self.node(i as isize, nz - 2)
        } else {
            self.values[g.index(i, j as usize)]
        }
    }

    fn locate(&self, theta: f64, z: f64) -> Result<(isize, f64, isize, f64)> {
        let (zl, zh) = self.z_range();
        if !(z >= zl && z <= zh) || !theta.is_finite() {
            return Err(Error::OutOfGrid { theta, z });
        }
        let g = self.grid;
        let th = reduce_theta(theta);
        let u = (th + core::f64::consts::FRAC_PI_2) / g.h_theta() - 0.5;
        let v = (z - g.z_lo) / g.h_z() - 0.5;
        // snap onto nodes so nodal values come back exactly
        let snap = |x: f64| if (x - x.round()).abs() < 1e-9 { x.round() } else { x };
        let (u, v) = (snap(u), snap(v));
        let i0 = u.floor();
        let j0 = v.floor().min((g.n_z - 2) as f64);
        Ok((i0 as isize, u - i0, j0 as isize, v - j0))
    }

    fn eval_raw(&self, theta: f64, z: f64) -> Result<(f64, f64, f64)> {
        let (i0, tu, j0, tv) = self.locate(theta, z)?;
        let (wt, _, _) = weights(tu);
        let (wv, wd, wdd) = weights(tv);
        let (mut g, mut gz, mut gzz) = (0.0, 0.0, 0.0);
        for (b, ((a0, a1), a2)) in wv.iter().zip(&wd).zip(&wdd).enumerate() {
            let j = j0 - 1 + b as isize;
            let row: f64 = (0..4).map(|a| wt[a] * self.node(i0 - 1 + a as isize, j)).sum();
            g += a0 * row;
            gz += a1 * row;
            gzz += a2 * row;
        }
        let hz = self.grid.h_z();
        Ok((g, gz / hz, gzz / (hz * hz)))
    }

    pub fn value(&self, theta: f64, z: f64) -> Result<f64> {
        self.eval_raw(theta, z).map(|v| v.0)
    }

    pub fn eval(&self, theta: f64, z: f64) -> Result<InterpValue> {
        let (g, g_z, g_zz) = self.eval_raw(theta, z)?;
        let d = 1e-3 * self.grid.h_theta();
        let gp = self.eval_raw(theta + d, z)?.0;
        let gm = self.eval_raw(theta - d, z)?.0;
        Ok(InterpValue {
            g,
            g_theta: (gp - gm) / (2.0 * d),
            g_z,
            g_zz,
        })
    }
}
