//! Closed-form GEV and GPD mathematics.
//!
//! Tail quantities are expressed as nonnegative depths `l = u - x` below a
//! threshold `u`, so the lower tail of received power is modeled with the
//! usual exceedance form of the generalized Pareto distribution:
//!
//! ```text
//! G(l) = 1 - (1 + xi * l / sigma)^(-1/xi)
//! ```
//!
//! Conversion between dBm and depths happens only at module boundaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this magnitude the shape is treated as zero (Gumbel / exponential limit).
pub const XI_ZERO: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    pub mu: f64,
    pub sigma: f64,
    pub xi: f64,
}

impl GevParams {
    pub fn new(mu: f64, sigma: f64, xi: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) || !mu.is_finite() || !xi.is_finite() {
            return Err(Error::domain(format!(
                "invalid GEV parameters mu={mu}, sigma={sigma}, xi={xi}"
            )));
        }
        Ok(Self { mu, sigma, xi })
    }
}

/// Fitted univariate lower-tail model.
///
/// `zeta` is the exceedance probability `Pr(X < u)`. A value of exactly 1
/// denotes a sample that is already conditioned on exceedance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdParams {
    pub xi: f64,
    pub sigma_tilde: f64,
    pub u: f64,
    pub zeta: f64,
}

impl GpdParams {
    pub fn new(xi: f64, sigma_tilde: f64, u: f64, zeta: f64) -> Result<Self> {
        if !(sigma_tilde.is_finite() && sigma_tilde > 0.0) {
            return Err(Error::domain(format!(
                "GPD scale must be positive, got {sigma_tilde}"
            )));
        }
        if !xi.is_finite() || !u.is_finite() {
            return Err(Error::domain(format!("invalid GPD shape {xi} or threshold {u}")));
        }
        if !(zeta > 0.0 && zeta <= 1.0) {
            return Err(Error::domain(format!(
                "exceedance probability must lie in (0, 1], got {zeta}"
            )));
        }
        Ok(Self {
            xi,
            sigma_tilde,
            u,
            zeta,
        })
    }

    /// Shape and scale only; threshold 0 and conditional exceedance probability.
    pub fn shape_scale(xi: f64, sigma_tilde: f64) -> Result<Self> {
        Self::new(xi, sigma_tilde, 0.0, 1.0)
    }

    pub fn depth(&self, x_dbm: f64) -> f64 {
        self.u - x_dbm
    }
}

/// Depth of a cluster minimum below the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exceedance {
    pub l: f64,
    pub t: i64,
}

impl Exceedance {
    pub fn new(l: f64, t: i64) -> Result<Self> {
        if !(l >= 0.0 && l.is_finite()) {
            return Err(Error::domain(format!("exceedance depth must be >= 0, got {l}")));
        }
        Ok(Self { l, t })
    }
}

/// GEV distribution function. Outside the support returns the boundary value.
pub fn gev_cdf(z: f64, p: &GevParams) -> f64 {
    let s = (z - p.mu) / p.sigma;
    if p.xi.abs() < XI_ZERO {
        return (-(-s).exp()).exp();
    }
    let t = 1.0 + p.xi * s;
    if t <= 0.0 {
        // Below the lower endpoint for xi > 0, above the upper one for xi < 0.
        return if p.xi > 0.0 { 0.0 } else { 1.0 };
    }
    (-(-(t.ln()) / p.xi).exp()).exp()
}

pub fn gpd_cdf(l: f64, p: &GpdParams) -> Result<f64> {
    if !(l >= 0.0) {
        return Err(Error::domain(format!("exceedance depth must be >= 0, got {l}")));
    }
    Ok(gpd_cdf_unchecked(l, p.xi, p.sigma_tilde))
}

pub(crate) fn gpd_cdf_unchecked(l: f64, xi: f64, sigma: f64) -> f64 {
    if l.is_infinite() {
        return 1.0;
    }
    if xi.abs() < XI_ZERO {
        return -(-l / sigma).exp_m1();
    }
    let z = xi * l / sigma;
    if z <= -1.0 {
        return 1.0;
    }
    -(-(z.ln_1p()) / xi).exp_m1()
}

/// Survival `1 - G(l)`, computed without cancellation for deep tails.
pub(crate) fn gpd_sf_unchecked(l: f64, xi: f64, sigma: f64) -> f64 {
    if xi.abs() < XI_ZERO {
        return (-l / sigma).exp();
    }
    let z = xi * l / sigma;
    if z <= -1.0 {
        return 0.0;
    }
    (-(z.ln_1p()) / xi).exp()
}

pub fn gpd_quantile(pr: f64, p: &GpdParams) -> Result<f64> {
    if !(0.0..1.0).contains(&pr) {
        return Err(Error::domain(format!("probability must lie in [0, 1), got {pr}")));
    }
    Ok(gpd_quantile_unchecked(pr, p.xi, p.sigma_tilde))
}

pub(crate) fn gpd_quantile_unchecked(pr: f64, xi: f64, sigma: f64) -> f64 {
    let log_sf = (-pr).ln_1p();
    if xi.abs() < XI_ZERO {
        return -sigma * log_sf;
    }
    sigma / xi * (-xi * log_sf).exp_m1()
}

/// Upper end of the depth support: `-sigma/xi` for `xi < 0`, otherwise infinite.
pub fn gpd_support_endpoint(p: &GpdParams) -> f64 {
    if p.xi < 0.0 {
        -p.sigma_tilde / p.xi
    } else {
        f64::INFINITY
    }
}

/// Log-likelihood of depths under the GPD; `-inf` outside the support.
pub fn gpd_log_likelihood(excesses: &[f64], xi: f64, sigma_tilde: f64) -> Result<f64> {
    if excesses.is_empty() {
        return Err(Error::domain("log-likelihood of an empty sample"));
    }
    if !(sigma_tilde > 0.0) {
        return Err(Error::domain(format!("GPD scale must be positive, got {sigma_tilde}")));
    }
    if let Some(&bad) = excesses.iter().find(|&&l| !(l >= 0.0)) {
        return Err(Error::domain(format!("negative exceedance depth {bad}")));
    }
    Ok(log_likelihood_sum(excesses, xi, sigma_tilde))
}

pub(crate) fn log_likelihood_sum(excesses: &[f64], xi: f64, sigma: f64) -> f64 {
    let log_sigma = sigma.ln();
    let n = excesses.len() as f64;
    if xi.abs() < XI_ZERO {
        let s: f64 = excesses.iter().sum();
        return -n * log_sigma - s / sigma;
    }
    let mut acc = 0.0;
    for &l in excesses {
        let z = xi * l / sigma;
        if z <= -1.0 {
            return f64::NEG_INFINITY;
        }
        acc += z.ln_1p();
    }
    -n * log_sigma - (1.0 + 1.0 / xi) * acc
}
