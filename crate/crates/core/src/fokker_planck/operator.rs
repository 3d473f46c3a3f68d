use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::banded::BandMatrix;
use super::grid::Grid2D;
use crate::error::{Error, Result};
use crate::params::DerivedConsts;
use crate::transforms::angular_drift;

/// Upwind finite-difference generator on a [`Grid2D`].
///
/// Each node has at most four outgoing jump rates (to `theta +- h`, `z +- h`),
/// all non-negative, and a diagonal equal to minus their sum, so row sums vanish.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseOperator {
    pub grid: Grid2D,
    /// Rate towards `i + 1`.
    pub east: Vec<f64>,
    /// Rate towards `i - 1`.
    pub west: Vec<f64>,
    /// Rate towards `j + 1`; zero on the top row.
    pub north: Vec<f64>,
    /// Rate towards `j - 1`; zero on the bottom row.
    pub south: Vec<f64>,
}

pub fn build_operator(grid: &Grid2D, c: &DerivedConsts, alpha: f64) -> Result<SparseOperator> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::DegenerateDiffusion);
    }
    let n = grid.len();
    let (ht, hz) = (grid.h_theta(), grid.h_z());
    let diff = 0.5 * alpha * alpha / (hz * hz);
    let mut op = SparseOperator {
        grid: *grid,
        east: vec![0.0; n],
        west: vec![0.0; n],
        north: vec![0.0; n],
        south: vec![0.0; n],
    };
    for j in 0..grid.n_z {
        let z = grid.z(j);
        let m = -c.gamma * (z - c.z_star);
        let up = diff + m.max(0.0) / hz;
        let down = diff + (-m).max(0.0) / hz;
        for i in 0..grid.n_theta {
            let k = grid.index(i, j);
            let b = angular_drift(grid.theta(i), z);
            op.east[k] = b.max(0.0) / ht;
            op.west[k] = (-b).max(0.0) / ht;
            if j + 1 < grid.n_z {
                op.north[k] = up;
            }
            if j > 0 {
                op.south[k] = down;
            }
        }
    }
    Ok(op)
}

impl SparseOperator {
    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    #[inline]
    fn neighbours(&self, k: usize) -> [usize; 4] {
        let g = &self.grid;
        let (i, j) = g.coords(k);
        let e = g.index((i + 1) % g.n_theta, j);
        let w = g.index((i + g.n_theta - 1) % g.n_theta, j);
        let n = if j + 1 < g.n_z { k + g.n_theta } else { k };
        let s = if j > 0 { k - g.n_theta } else { k };
        [e, w, n, s]
    }

    #[inline]
    fn rates(&self, k: usize) -> [f64; 4] {
        [self.east[k], self.west[k], self.north[k], self.south[k]]
    }

    pub fn diagonal(&self, k: usize) -> f64 {
        -self.rates(k).iter().sum::<f64>()
    }

    /// Non-zero entries `(column, value)` of row `k`, diagonal first.
    pub fn row(&self, k: usize) -> Vec<(usize, f64)> {
        let mut out = vec![(k, self.diagonal(k))];
        for (nb, r) in self.neighbours(k).into_iter().zip(self.rates(k)) {
            if r != 0.0 {
                out.push((nb, r));
            }
        }
        out
    }

    /// `(A f)_k = sum of rate * (f_nb - f_k)`; maps constants to exactly zero.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|k| {
                let fk = f[k];
                self.neighbours(k)
                    .into_iter()
                    .zip(self.rates(k))
                    .map(|(nb, r)| r * (f[nb] - fk))
                    .sum()
            })
            .collect()
    }

    /// `A^T mu`: net probability inflow at each node.
    pub fn apply_transpose(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for k in 0..self.dim() {
            let m = mu[k];
            for (nb, r) in self.neighbours(k).into_iter().zip(self.rates(k)) {
                out[nb] += r * m;
                out[k] -= r * m;
            }
        }
        out
    }

    /// Banded copy of `-A` with row and column `pin` replaced by the identity.
    pub(crate) fn pinned_band(&self, pin: usize) -> BandMatrix {
        let n = self.dim();
        let mut b = BandMatrix::zeros(n, self.grid.n_theta);
        for k in 0..n {
            if k == pin {
                continue;
            }
            b.add(k, k, -self.diagonal(k));
            for (nb, r) in self.neighbours(k).into_iter().zip(self.rates(k)) {
                if nb != pin && nb != k {
                    b.add(k, nb, -r);
                }
            }
        }
        b.set(pin, pin, 1.0);
        b
    }

    /// Largest absolute row sum, a scale for residual checks.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim()).map(|k| 2.0 * self.diagonal(k).abs()).fold(0.0, f64::max)
    }
}
