//! Unit Fréchet standardization and pseudo-polar coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpd::{self, GpdParams};
use crate::stats;

/// Default cap for transformed values of fades beyond a finite endpoint.
pub const FRECHET_CAP: f64 = 1e12;

/// A joint tail observation on the unit Fréchet scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrechetPair {
    pub x_tilde: f64,
    pub y_tilde: f64,
    pub window: i64,
}

impl FrechetPair {
    pub fn new(x_tilde: f64, y_tilde: f64, window: i64) -> Result<Self> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(x_tilde) || !ok(y_tilde) {
            return Err(Error::domain(format!(
                "Fréchet components must be positive and finite, got ({x_tilde}, {y_tilde})"
            )));
        }
        Ok(Self {
            x_tilde,
            y_tilde,
            window,
        })
    }
}

/// Angular component `omega` in [0, 1] and non-positive radial component `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PickandsPoint {
    pub omega: f64,
    pub r: f64,
}

/// Maps a dBm value below the threshold to the unit Fréchet scale:
/// `-1 / ln(1 - zeta * (1 + xi (u - x) / sigma)^(-1/xi))`.
///
/// Deeper fades map to larger values. A fade at or beyond a finite support
/// endpoint maps to `+inf`.
pub fn frechet_transform(x: f64, p: &GpdParams) -> Result<f64> {
    if !(x < p.u) {
        return Err(Error::domain(format!(
            "value {x} is not below the threshold {}",
            p.u
        )));
    }
    let survival = gpd::gpd_sf_unchecked(p.u - x, p.xi, p.sigma_tilde);
    let log_cdf = (-p.zeta * survival).ln_1p();
    if log_cdf == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-1.0 / log_cdf)
}

/// As [`frechet_transform`], capping the result at `cap`. The flag reports
/// whether the cap was applied.
pub fn frechet_transform_capped(x: f64, p: &GpdParams, cap: f64) -> Result<(f64, bool)> {
    let v = frechet_transform(x, p)?;
    if v > cap {
        Ok((cap, true))
    } else {
        Ok((v, false))
    }
}

/// Kolmogorov–Smirnov distance to the unit Fréchet CDF `exp(-1/x)`.
pub fn frechet_margin_ks(transformed: &[f64]) -> f64 {
    stats::ks_distance(transformed, |v| if v > 0.0 { (-1.0 / v).exp() } else { 0.0 })
}

/// Pseudo-polar coordinates with the sum-norm radial `r = -(x + y) / n`.
pub fn pickands_transform(f: &FrechetPair, n: usize) -> PickandsPoint {
    let s = f.x_tilde + f.y_tilde;
    PickandsPoint {
        omega: f.x_tilde / s,
        r: -s / n as f64,
    }
}

pub fn pickands_inverse(pt: &PickandsPoint, n: usize) -> Result<FrechetPair> {
    if pt.r == 0.0 {
        return Err(Error::domain("radial component 0 has no inverse"));
    }
    let s = -(n as f64) * pt.r;
    FrechetPair::new(s * pt.omega, s * (1.0 - pt.omega), 0)
}

/// Pseudo-polar coordinates with radial `r = -1 / (x + y)`, which places
/// the largest joint values nearest 0 and makes `r` conditionally uniform
/// on `(r0, 0)` for large radii.
pub fn extremal_pickands_transform(f: &FrechetPair) -> PickandsPoint {
    let s = f.x_tilde + f.y_tilde;
    PickandsPoint {
        omega: f.x_tilde / s,
        r: -1.0 / s,
    }
}

pub fn extremal_pickands_inverse(pt: &PickandsPoint) -> Result<FrechetPair> {
    if pt.r == 0.0 {
        return Err(Error::domain("radial component 0 has no inverse"));
    }
    let s = -1.0 / pt.r;
    FrechetPair::new(s * pt.omega, s * (1.0 - pt.omega), 0)
}

/// Which radial coordinate a set of Pickands points uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RadialCoordinate {
    SumNorm { n: usize },
    Reciprocal,
}

impl RadialCoordinate {
    pub fn forward(&self, f: &FrechetPair) -> PickandsPoint {
        match *self {
            RadialCoordinate::SumNorm { n } => pickands_transform(f, n),
            RadialCoordinate::Reciprocal => extremal_pickands_transform(f),
        }
    }

    pub fn inverse(&self, pt: &PickandsPoint) -> Result<FrechetPair> {
        match *self {
            RadialCoordinate::SumNorm { n } => pickands_inverse(pt, n),
            RadialCoordinate::Reciprocal => extremal_pickands_inverse(pt),
        }
    }

    /// Absolute Jacobian of the inverse map, up to a constant factor:
    /// `|r|` for the sum-norm radial, `|r|^-3` for the reciprocal one.
    pub fn jacobian(&self, r: f64) -> f64 {
        match self {
            RadialCoordinate::SumNorm { .. } => r.abs(),
            RadialCoordinate::Reciprocal => r.abs().powi(-3),
        }
    }
}
