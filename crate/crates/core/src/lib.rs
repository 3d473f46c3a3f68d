//! Numerical core for the stochastically forced Lorenz system.
//!
//! The crate is `no_std` (it needs `alloc`) and carries no IO. Everything here
//! works in the rescaled variables `(x, y, z)` of the transformed system
//!
//! ```text
//! dx = y dt
//! dy = (x (z - 2) - 2 y) dt
//! dz = (-gamma (z - z_star) - x (x + eta y)) dt + alpha dW
//! ```
//!
//! and in its polar form `(r, theta, z)`, in which the linearisation around the
//! invariant axis `x = y = 0` reads
//!
//! ```text
//! dtheta = 1 - z sin^2(theta),    dr = -1 + (z / 2) sin(2 theta).
//! ```
//!
//! The sign of the averaged radial rate `lambda` decides whether the axis is
//! stable. The modules provide four ways of computing it ([`estimators`],
//! [`fokker_planck`], [`excursions`]), a noise-aware root finder for the
//! threshold where it changes sign ([`threshold`]), and numerical checks of
//! the accompanying Lyapunov functionals ([`lyapunov`], [`theory_checks`]).

#![no_std]
#![forbid(unsafe_code)]
// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// `Float` supplies the float methods without std; some toolchain/profile
// combinations resolve them inherently and flag the import as unused
#![allow(unused_imports)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod estimators;
pub mod excursions;
pub mod fokker_planck;
pub mod lyapunov;
pub mod params;
pub mod quadrature;
pub mod rng;
pub mod sde;
pub mod stats;
pub mod theory_checks;
pub mod threshold;
pub mod transforms;

pub use error::{Error, Result};
pub use params::{DerivedConsts, Model, Params};
