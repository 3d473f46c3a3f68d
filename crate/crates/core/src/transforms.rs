//! Coordinate charts and pointwise generator evaluation.
//!
//! Three charts are in use: the original `(X, Y, Z)`, the rescaled `(x, y, z)`
//! and the polar `(r, theta, z)` with
//!
//! ```text
//! x = e^r sin(theta),   y = e^r (cos(theta) - sin(theta)).
//! ```
//!
//! Angles are reduced to `[-pi/2, pi/2)`: the linearised dynamics only sees
//! `sin^2(theta)` and `sin(2 theta)`, so `theta` and `theta + pi` are the same point.

use num_traits::Float;
use core::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::DerivedConsts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    Original,
    Transformed,
    Polar,
}

impl Chart {
    pub fn name(self) -> &'static str {
        match self {
            Chart::Original => "original",
            Chart::Transformed => "transformed",
            Chart::Polar => "polar",
        }
    }
}

/// A point in one of the three charts: `(X, Y, Z)`, `(x, y, z)` or `(r, theta, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub chart: Chart,
    pub coords: [f64; 3],
}

impl State {
    pub fn original(x: f64, y: f64, z: f64) -> Self {
        Self {
            chart: Chart::Original,
            coords: [x, y, z],
        }
    }

    pub fn transformed(x: f64, y: f64, z: f64) -> Self {
        Self {
            chart: Chart::Transformed,
            coords: [x, y, z],
        }
    }

    /// Polar point; `theta` is reduced modulo `pi`.
    pub fn polar(r: f64, theta: f64, z: f64) -> Self {
        Self {
            chart: Chart::Polar,
            coords: [r, reduce_theta(theta), z],
        }
    }

    fn expect(&self, chart: Chart) -> Result<[f64; 3]> {
        if self.chart == chart {
            Ok(self.coords)
        } else {
            Err(Error::ChartMismatch {
                expected: chart.name(),
                found: self.chart.name(),
            })
        }
    }
}

/// Reduces an angle to the representative in `[-pi/2, pi/2)`.
#[inline]
pub fn reduce_theta(theta: f64) -> f64 {
    if (-FRAC_PI_2..FRAC_PI_2).contains(&theta) {
        return theta;
    }
    let mut t = theta - PI * ((theta + FRAC_PI_2) / PI).floor();
    if t >= FRAC_PI_2 {
        t -= PI;
    }
    if t < -FRAC_PI_2 {
        t += PI;
    }
    t
}

/// Original to rescaled coordinates (pointwise; the time change is not part of this map).
pub fn to_transformed(s: &State, c: &DerivedConsts) -> Result<State> {
    let [x, y, z] = s.expect(Chart::Original)?;
    let sigma = sigma_of(c);
    Ok(State::transformed(
        c.nu / c.chi * x,
        c.nu * sigma * (y - x),
        c.z_star - c.chi * c.chi * sigma * z,
    ))
}

pub fn from_transformed(s: &State, c: &DerivedConsts) -> Result<State> {
    let [x, y, z] = s.expect(Chart::Transformed)?;
    let sigma = sigma_of(c);
    let big_x = c.chi / c.nu * x;
    Ok(State::original(
        big_x,
        big_x + y / (c.nu * sigma),
        (c.z_star - z) / (c.chi * c.chi * sigma),
    ))
}

/// Recovers `sigma` from `nu^2 = chi^5 sigma`; `DerivedConsts` does not store it.
#[inline]
pub(crate) fn sigma_of(c: &DerivedConsts) -> f64 {
    c.nu * c.nu / c.chi.powi(5)
}

/// `(x, y)` to `(r, theta)`; undefined on the axis.
pub fn to_polar(x: f64, y: f64) -> Result<(f64, f64)> {
    let s = x + y;
    if x == 0.0 && s == 0.0 {
        return Err(Error::OnAxis);
    }
    let r = x.hypot(s).ln();
    Ok((r, reduce_theta(x.atan2(s))))
}

#[inline]
pub fn from_polar(r: f64, theta: f64) -> (f64, f64) {
    let e = r.exp();
    let (s, c) = theta.sin_cos();
    (e * s, e * (c - s))
}

pub fn polar_to_transformed(s: &State) -> Result<State> {
    let [r, theta, z] = s.expect(Chart::Polar)?;
    let (x, y) = from_polar(r, theta);
    Ok(State::transformed(x, y, z))
}

pub fn transformed_to_polar(s: &State) -> Result<State> {
    let [x, y, z] = s.expect(Chart::Transformed)?;
    let (r, theta) = to_polar(x, y)?;
    Ok(State::polar(r, theta, z))
}

/// Radial rate `-1 + (z/2) sin(2 theta)` of the linearised system.
#[inline]
pub fn radial_rate(theta: f64, z: f64) -> f64 {
    -1.0 + 0.5 * z * (2.0 * theta).sin()
}

/// Angular drift `1 - z sin^2(theta)`.
#[inline]
pub fn angular_drift(theta: f64, z: f64) -> f64 {
    let s = theta.sin();
    1.0 - z * s * s
}

/// Value and derivatives of a test function at a point.
///
/// `d1`, `d2` are the derivatives along the first two coordinates of the chart
/// the point lives in: `(f_x, f_y)` for the rescaled chart, `(f_r, f_theta)`
/// for the polar one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Partials {
    pub f: f64,
    pub d1: f64,
    pub d2: f64,
    pub dz: f64,
    pub dzz: f64,
}

impl Partials {
    pub fn is_finite(&self) -> bool {
        self.f.is_finite()
            && self.d1.is_finite()
            && self.d2.is_finite()
            && self.dz.is_finite()
            && self.dzz.is_finite()
    }

    pub fn scale(self, k: f64) -> Self {
        Self {
            f: k * self.f,
            d1: k * self.d1,
            d2: k * self.d2,
            dz: k * self.dz,
            dzz: k * self.dzz,
        }
    }

    pub fn sum(self, o: Self) -> Self {
        Self {
            f: self.f + o.f,
            d1: self.d1 + o.d1,
            d2: self.d2 + o.d2,
            dz: self.dz + o.dz,
            dzz: self.dzz + o.dzz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Generator {
    /// Full rescaled system.
    L,
    /// Linearisation around the axis (no `x (x + eta y)` feedback in `z`).
    L1,
    /// `(theta, z)` component of the linearisation.
    L0,
}

/// Applies one of the three generators to the supplied derivatives.
///
/// `L` and `L1` accept rescaled or polar points, `L0` a polar point (its `r`
/// is ignored). Original-chart points are rejected.
pub fn apply_generator(
    which: Generator,
    point: &State,
    partials: &Partials,
    c: &DerivedConsts,
    alpha: f64,
) -> Result<f64> {
    if !partials.is_finite() {
        return Err(Error::Precondition("non-finite partials".into()));
    }
    let p = partials;
    let [_, _, z] = point.coords;
    let ou = -c.gamma * (z - c.z_star) * p.dz + 0.5 * alpha * alpha * p.dzz;
    match (which, point.chart) {
        (Generator::L0, Chart::Polar) => {
            let theta = point.coords[1];
            Ok(angular_drift(theta, z) * p.d2 + ou)
        }
        (Generator::L0, found) => Err(Error::ChartMismatch {
            expected: Chart::Polar.name(),
            found: found.name(),
        }),
        (Generator::L | Generator::L1, Chart::Transformed) => {
            let [x, y, _] = point.coords;
            let mut v = y * p.d1 + (x * (z - 2.0) - 2.0 * y) * p.d2 + ou;
            if which == Generator::L {
                v -= x * (x + c.eta * y) * p.dz;
            }
            Ok(v)
        }
        (Generator::L | Generator::L1, Chart::Polar) => {
            let [r, theta, _] = point.coords;
            let mut v = radial_rate(theta, z) * p.d1 + angular_drift(theta, z) * p.d2 + ou;
            if which == Generator::L {
                let (x, y) = from_polar(r, theta);
                v -= x * (x + c.eta * y) * p.dz;
            }
            Ok(v)
        }
        (_, found) => Err(Error::ChartMismatch {
            expected: Chart::Transformed.name(),
            found: found.name(),
        }),
    }
}
