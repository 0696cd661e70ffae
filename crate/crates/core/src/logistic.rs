//! Symmetric logistic bivariate extreme-value model on unit Fréchet margins.
//!
//! `G(x, y) = exp(-V(x, y))` with exponent measure
//! `V(x, y) = (x^(-1/alpha) + y^(-1/alpha))^alpha`. `alpha = 1` is
//! independence, `alpha -> 0` complete dependence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim;
use crate::stats::log_add_exp;
use crate::transforms::FrechetPair;

pub const ALPHA_LOWER: f64 = 1e-4;
pub const ALPHA_UPPER: f64 = 1.0 - 1e-4;
const ALPHA_TOL: f64 = 1e-6;
const MIN_PAIRS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogisticFitMethod {
    FromRho,
    /// Full bivariate density `G (V_x V_y - V_xy)`.
    Mle,
    /// Mixed partial of the exponent measure alone, `-V_xy`.
    MleMixedPartial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependenceBoundary {
    NearIndependence,
    NearCompleteDependence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub alpha: f64,
    pub fit_method: LogisticFitMethod,
    pub loglik: Option<f64>,
    pub boundary: Option<DependenceBoundary>,
}

impl LogisticModel {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::domain(format!("logistic alpha must lie in (0, 1], got {alpha}")));
        }
        Ok(Self {
            alpha,
            fit_method: LogisticFitMethod::FromRho,
            loglik: None,
            boundary: boundary_flag(alpha),
        })
    }
}

fn boundary_flag(alpha: f64) -> Option<DependenceBoundary> {
    if alpha > 0.95 {
        Some(DependenceBoundary::NearIndependence)
    } else if alpha < 0.05 {
        Some(DependenceBoundary::NearCompleteDependence)
    } else {
        None
    }
}

/// Dependence parameter implied by the correlation `rho = 1 - alpha^2`.
pub fn alpha_from_rho(rho: f64) -> Result<LogisticModel> {
    if rho.is_nan() || rho < 0.0 {
        return Err(Error::domain(format!(
            "correlation {rho} is negative; the logistic family only represents positive association"
        )));
    }
    if rho >= 1.0 {
        return Err(Error::Degenerate(format!(
            "correlation {rho} implies complete dependence (alpha = 0)"
        )));
    }
    LogisticModel::new((1.0 - rho).sqrt())
}

/// `ln(x^(-1/alpha) + y^(-1/alpha))`.
fn log_sum(x: f64, y: f64, alpha: f64) -> f64 {
    log_add_exp(-x.ln() / alpha, -y.ln() / alpha)
}

pub fn v_logistic(x_tilde: f64, y_tilde: f64, alpha: f64) -> f64 {
    (alpha * log_sum(x_tilde, y_tilde, alpha)).exp()
}

pub fn g_logistic(x_tilde: f64, y_tilde: f64, m: &LogisticModel) -> f64 {
    (-v_logistic(x_tilde, y_tilde, m.alpha)).exp()
}

/// Closed-form `d^2 V / dx dy`:
/// `-((1 - alpha) / alpha) (xy)^(-1/alpha - 1) (x^(-1/alpha) + y^(-1/alpha))^(alpha - 2)`.
pub fn logistic_mixed_partial(x_tilde: f64, y_tilde: f64, alpha: f64) -> f64 {
    if alpha >= 1.0 {
        return 0.0;
    }
    let lxy = x_tilde.ln() + y_tilde.ln();
    let l = log_sum(x_tilde, y_tilde, alpha);
    -((1.0 - alpha) / alpha) * ((alpha - 2.0) * l + (-1.0 / alpha - 1.0) * lxy).exp()
}

/// First partials `(V_x, V_y)`.
pub fn logistic_gradient(x_tilde: f64, y_tilde: f64, alpha: f64) -> (f64, f64) {
    let l = log_sum(x_tilde, y_tilde, alpha);
    let k = -1.0 / alpha - 1.0;
    let vx = -((alpha - 1.0) * l + k * x_tilde.ln()).exp();
    let vy = -((alpha - 1.0) * l + k * y_tilde.ln()).exp();
    (vx, vy)
}

/// Log of the bivariate density `G (V_x V_y - V_xy)`.
pub fn log_density(x_tilde: f64, y_tilde: f64, alpha: f64) -> f64 {
    let lxy = x_tilde.ln() + y_tilde.ln();
    let l = log_sum(x_tilde, y_tilde, alpha);
    let v = (alpha * l).exp();
    -v + (-1.0 / alpha - 1.0) * lxy + (alpha - 2.0) * l + (v + (1.0 - alpha) / alpha).ln()
}

/// `ln(-V_xy)`.
pub fn log_neg_mixed_partial(x_tilde: f64, y_tilde: f64, alpha: f64) -> f64 {
    let lxy = x_tilde.ln() + y_tilde.ln();
    let l = log_sum(x_tilde, y_tilde, alpha);
    ((1.0 - alpha) / alpha).ln() + (alpha - 2.0) * l + (-1.0 / alpha - 1.0) * lxy
}

fn fit_with(pairs: &[FrechetPair], method: LogisticFitMethod, term: fn(f64, f64, f64) -> f64) -> Result<LogisticModel> {
    if pairs.len() < MIN_PAIRS {
        return Err(Error::TooFewSamples {
            what: "logistic dependence fit",
            needed: MIN_PAIRS,
            got: pairs.len(),
        });
    }
    let negll = |alpha: f64| -> f64 {
        -pairs
            .iter()
            .map(|p| term(p.x_tilde, p.y_tilde, alpha))
            .sum::<f64>()
    };
    let m = optim::brent_minimize(negll, ALPHA_LOWER, ALPHA_UPPER, ALPHA_TOL, 200);
    if !m.converged || !m.f.is_finite() {
        return Err(Error::NonConvergence {
            iterations: m.iterations,
            xi: m.x,
            sigma: f64::NAN,
            loglik: -m.f,
        });
    }
    Ok(LogisticModel {
        alpha: m.x,
        fit_method: method,
        loglik: Some(-m.f),
        boundary: boundary_flag(m.x),
    })
}

/// Maximum-likelihood `alpha` under the full bivariate density.
pub fn fit_alpha_mle(pairs: &[FrechetPair]) -> Result<LogisticModel> {
    fit_with(pairs, LogisticFitMethod::Mle, log_density)
}

/// Maximum-likelihood `alpha` using only `ln(-V_xy)` per pair. This is the
/// angular (spectral) likelihood, consistent on points with large radius.
pub fn fit_alpha_mle_mixed_partial(pairs: &[FrechetPair]) -> Result<LogisticModel> {
    fit_with(pairs, LogisticFitMethod::MleMixedPartial, log_neg_mixed_partial)
}

/// Density of the logistic angular measure on `omega in (0, 1)`, normalized
/// to unit mass with mean 1/2.
pub fn angular_density(omega: f64, alpha: f64) -> f64 {
    if !(omega > 0.0 && omega < 1.0) {
        return 0.0;
    }
    let w = omega;
    let k = -1.0 / alpha;
    let l = log_add_exp(k * w.ln(), k * (1.0 - w).ln());
    0.5 * ((1.0 - alpha) / alpha) * ((alpha - 2.0) * l + (k - 1.0) * (w.ln() + (1.0 - w).ln())).exp()
}
