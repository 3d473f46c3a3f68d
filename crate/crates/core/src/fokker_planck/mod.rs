//! Stationary Fokker-Planck and Poisson solves for the `(theta, z)` generator
//!
//! ```text
//! L0 = (1 - z sin^2 theta) d_theta - gamma (z - z*) d_z + (alpha^2 / 2) d_zz
//! ```
//!
//! on a truncated cylinder.
//!
//! The one-dimensional kernel is removed by pinning: row and column `k0` of the
//! discrete generator are replaced by the identity and the resulting
//! non-singular M-matrix is factored once. `mu_k0 = 1` then determines the
//! stationary measure up to normalisation, and `g_k0 = 0` the Poisson solution
//! up to its additive constant. The pin is placed on a high-probability node;
//! pinning a node with negligible mass amplifies the residual of the dropped
//! equation.

mod banded;
mod grid;
mod interp;
mod operator;

use num_traits::Float;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use banded::{BandLu, BandMatrix};
pub use grid::{Grid2D, DEFAULT_HALF_WIDTH_SD, DEFAULT_N_THETA, DEFAULT_N_Z};
pub use interp::{GridInterp, InterpValue};
pub use operator::{build_operator, SparseOperator};

use crate::error::{Error, Result};
use crate::estimators::f_observable;
use crate::params::DerivedConsts;
use crate::stats::normal_cdf;

/// Probability density per cell (`sum(weights) * cell_area = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub weights: Vec<f64>,
}

/// Nodal values of a function on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub values: Vec<f64>,
}

impl DiscreteMeasure {
    /// `integral of f d mu` with `f` given at the nodes.
    pub fn integrate(&self, grid: &Grid2D, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum::<f64>() * grid.cell_area()
    }

    /// Point mass of unit total weight at node `(i, j)`.
    pub fn point_mass(grid: &Grid2D, i: usize, j: usize) -> Self {
        let mut weights = alloc::vec![0.0; grid.len()];
        weights[grid.index(i, j)] = 1.0 / grid.cell_area();
        Self { weights }
    }

    /// Probability of each `z` row.
    pub fn z_marginal(&self, grid: &Grid2D) -> Vec<f64> {
        let a = grid.cell_area();
        (0..grid.n_z)
            .map(|j| self.weights[j * grid.n_theta..(j + 1) * grid.n_theta].iter().sum::<f64>() * a)
            .collect()
    }

    /// Probability of each `theta` column.
    pub fn theta_marginal(&self, grid: &Grid2D) -> Vec<f64> {
        let a = grid.cell_area();
        (0..grid.n_theta)
            .map(|i| (0..grid.n_z).map(|j| self.weights[grid.index(i, j)]).sum::<f64>() * a)
            .collect()
    }

    /// L1 distance between the `z` marginal and `N(mean, sd^2)` binned on the same cells.
    pub fn z_marginal_l1_to_normal(&self, grid: &Grid2D, mean: f64, sd: f64) -> f64 {
        let m = self.z_marginal(grid);
        let h = grid.h_z();
        let mut d: f64 = m
            .iter()
            .enumerate()
            .map(|(j, p)| {
                let lo = grid.z_lo + j as f64 * h;
                let q = normal_cdf((lo + h - mean) / sd) - normal_cdf((lo - mean) / sd);
                (p - q).abs()
            })
            .sum();
        // Gaussian mass outside the truncated domain
        d += normal_cdf((grid.z_lo - mean) / sd) + 1.0 - normal_cdf((grid.z_hi - mean) / sd);
        d
    }
}

/// Midpoint quadrature of `F = -1 + (z / 2) sin(2 theta)` against `mu`.
pub fn lambda_from_measure(mu: &DiscreteMeasure, grid: &Grid2D) -> f64 {
    mu.integrate(grid, &f_nodes(grid))
}

/// `F` at every node.
pub fn f_nodes(grid: &Grid2D) -> Vec<f64> {
    (0..grid.len())
        .map(|k| {
            let (i, j) = grid.coords(k);
            f_observable(grid.theta(i), grid.z(j))
        })
        .collect()
}

/// Factorised pinned generator, reusable for the measure and Poisson solves.
#[derive(Debug, Clone)]
pub struct FpSolver {
    op: SparseOperator,
    pin: usize,
    lu: BandLu,
}

/// Minimum pinned mass relative to the maximum before the pin is moved.
const PIN_MASS_RATIO: f64 = 1e-3;
/// Relative residual accepted for the Poisson solve.
pub const POISSON_TOL: f64 = 1e-8;

impl FpSolver {
    /// Factors the operator pinned at the node nearest the stable angle over `z*`.
    pub fn new(op: SparseOperator, c: &DerivedConsts) -> Result<Self> {
        let g = op.grid;
        let theta0 = if c.z_star > 1.0 {
            (1.0 / c.z_star.sqrt()).asin()
        } else {
            0.0
        };
        let (i, j) = g.nearest(theta0, c.z_star);
        Self::with_pin(op, g.index(i, j))
    }

    pub fn with_pin(op: SparseOperator, pin: usize) -> Result<Self> {
        let lu = op.pinned_band(pin).factor()?;
        Ok(Self { op, pin, lu })
    }

    pub fn operator(&self) -> &SparseOperator {
        &self.op
    }

    pub fn grid(&self) -> &Grid2D {
        &self.op.grid
    }

    pub fn pin(&self) -> usize {
        self.pin
    }

    fn raw_measure(&self) -> Vec<f64> {
        // rows l != pin of A^T mu = 0 with mu_pin = 1, on the sign-flipped matrix
        let mut b = alloc::vec![0.0; self.op.dim()];
        for (col, v) in self.op.row(self.pin) {
            if col != self.pin {
                b[col] = v;
            }
        }
        b[self.pin] = 1.0;
        self.lu.solve_transpose(&b)
    }

    /// Stationary measure; re-pins once at the mode if the first pin carries little mass.
    pub fn stationary_measure(&mut self) -> Result<DiscreteMeasure> {
        let mut mu = self.raw_measure();
        let (arg, max) = mu
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |a, (k, &v)| if v > a.1 { (k, v) } else { a });
        if !(max.is_finite()) {
            return Err(Error::Singular(self.pin));
        }
        if mu[self.pin] < PIN_MASS_RATIO * max {
            *self = Self::with_pin(self.op.clone(), arg)?;
            mu = self.raw_measure();
        }
        normalise(&mut mu, &self.op.grid)?;
        Ok(DiscreteMeasure { weights: mu })
    }

    /// Solves `A g = lambda - F`, centred so that `mu(g) = 0`.
    pub fn solve_poisson(&self, mu: &DiscreteMeasure, lambda: f64) -> Result<GridFunction> {
        let grid = &self.op.grid;
        let mut rhs: Vec<f64> = f_nodes(grid).iter().map(|f| lambda - f).collect();
        let shift = mu.integrate(grid, &rhs);
        for v in rhs.iter_mut() {
            *v -= shift;
        }
        let norm_rhs = norm2(&rhs);
        let solve = |r: &[f64]| {
            // -A on the pinned system, the pinned equation dropped
            let mut b: Vec<f64> = r.iter().map(|v| -v).collect();
            b[self.pin] = 0.0;
            self.lu.solve(&b)
        };
        let mut g = solve(&rhs);
        let mut res = residual(&self.op, &g, &rhs);
        // one refinement sweep if the first pass is not clean
        if norm2(&res) > POISSON_TOL * norm_rhs {
            let dg = solve(&res.iter().map(|v| -v).collect::<Vec<_>>());
            for (a, d) in g.iter_mut().zip(&dg) {
                *a += d;
            }
            res = residual(&self.op, &g, &rhs);
        }
        let m = mu.integrate(grid, &g);
        for v in g.iter_mut() {
            *v -= m;
        }
        let r = norm2(&res) / norm_rhs.max(f64::MIN_POSITIVE);
        if !(r <= POISSON_TOL) {
            return Err(Error::NonConvergence {
                residual: r,
                tolerance: POISSON_TOL,
            });
        }
        Ok(GridFunction { values: g })
    }
}

fn residual(op: &SparseOperator, g: &[f64], rhs: &[f64]) -> Vec<f64> {
    op.apply(g).iter().zip(rhs).map(|(a, b)| a - b).collect()
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalise(mu: &mut [f64], grid: &Grid2D) -> Result<()> {
    let max = mu.iter().cloned().fold(0.0, f64::max);
    for v in mu.iter_mut() {
        if *v < 0.0 && *v > -1e-14 * max {
            *v = 0.0;
        }
    }
    if let Some(k) = mu.iter().position(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::Singular(k));
    }
    let total = mu.iter().sum::<f64>() * grid.cell_area();
    if !(total > 0.0) {
        return Err(Error::Singular(0));
    }
    for v in mu.iter_mut() {
        *v /= total;
    }
    Ok(())
}

/// Stationary measure of a freshly factored operator.
pub fn stationary_measure(op: &SparseOperator, c: &DerivedConsts) -> Result<DiscreteMeasure> {
    FpSolver::new(op.clone(), c)?.stationary_measure()
}

/// Centred Poisson solution; factors the operator afresh.
pub fn solve_poisson(
    op: &SparseOperator,
    mu: &DiscreteMeasure,
    c: &DerivedConsts,
    lambda: f64,
) -> Result<GridFunction> {
    FpSolver::new(op.clone(), c)?.solve_poisson(mu, lambda)
}

/// Everything a single `(grid, alpha)` solve produces.
#[derive(Debug, Clone)]
pub struct FpSolution {
    pub grid: Grid2D,
    pub mu: DiscreteMeasure,
    pub lambda: f64,
    pub g: Option<GridFunction>,
}

/// Builds, factors and solves; the Poisson step is optional since it costs a second pair of triangular solves.
pub fn solve_all(grid: &Grid2D, c: &DerivedConsts, alpha: f64, with_poisson: bool) -> Result<FpSolution> {
    let op = build_operator(grid, c, alpha)?;
    let mut s = FpSolver::new(op, c)?;
    let mu = s.stationary_measure()?;
    let lambda = lambda_from_measure(&mu, grid);
    let g = if with_poisson {
        Some(s.solve_poisson(&mu, lambda)?)
    } else {
        None
    };
    Ok(FpSolution {
        grid: *grid,
        mu,
        lambda,
        g,
    })
}

/// `lambda` on the default-width domain at resolution `(n_theta, n_z)`.
pub fn lambda_pde(c: &DerivedConsts, alpha: f64, n_theta: usize, n_z: usize) -> Result<f64> {
    let grid = Grid2D::around(c, alpha, n_theta, n_z)?;
    Ok(solve_all(&grid, c, alpha, false)?.lambda)
}

/// First-order Richardson extrapolation from two resolutions differing by a factor 2.
pub fn richardson(coarse: f64, fine: f64) -> f64 {
    2.0 * fine - coarse
}
