//! Average-statistics baseline: fitted margins ranked by AIC/BIC, and a
//! bivariate Gaussian read off deep in its tail.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};
use crate::quadrature;
use crate::stats::{self, std_normal_cdf, std_normal_pdf};

const MIN_SAMPLES: usize = 100;
/// AIC differences below this are reported as a tie.
pub const AIC_TIE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginFamily {
    /// Normal in dBm.
    Gaussian,
    /// Exponential linear power (Rayleigh amplitude).
    Rayleigh,
    /// Gamma linear power (Nakagami-m amplitude).
    Nakagami,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginCandidate {
    pub family: MarginFamily,
    /// Fitted parameters by name.
    pub params: Vec<(String, f64)>,
    /// Log-likelihood of the dBm samples.
    pub loglik: f64,
    pub n_params: usize,
    pub aic: f64,
    pub bic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginRanking {
    /// Sorted by AIC, best first.
    pub by_aic: Vec<MarginCandidate>,
    /// Families sorted by BIC, best first.
    pub by_bic: Vec<MarginFamily>,
    /// Set when the two best candidates are within 2 AIC units.
    pub tie: bool,
}

fn candidate(family: MarginFamily, params: Vec<(String, f64)>, loglik: f64, n: usize) -> MarginCandidate {
    let k = params.len();
    MarginCandidate {
        family,
        params,
        loglik,
        n_params: k,
        aic: 2.0 * k as f64 - 2.0 * loglik,
        bic: k as f64 * (n as f64).ln() - 2.0 * loglik,
    }
}

/// Solves `ln m - digamma(m) = s` for the gamma shape; the left side is
/// strictly decreasing in `m`.
fn gamma_shape(s: f64) -> f64 {
    let f = |m: f64| m.ln() - digamma(m) - s;
    let (mut lo, mut hi) = (1e-3_f64, 1e6_f64);
    if f(hi) > 0.0 {
        return hi;
    }
    if f(lo) < 0.0 {
        return lo;
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    (lo * hi).sqrt()
}

/// Fits Gaussian, Rayleigh and Nakagami-m margins to dBm samples and ranks
/// them. All likelihoods are on the dBm scale so the criteria compare.
pub fn fit_margin_candidates(samples: &[f64]) -> Result<MarginRanking> {
    let n = samples.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            what: "baseline margin fit",
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    let nf = n as f64;
    let mean = stats::mean(samples);
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
    if !(var > 0.0) {
        return Err(Error::Degenerate("baseline samples have zero variance".into()));
    }
    let gauss_ll = -0.5 * nf * ((2.0 * std::f64::consts::PI * var).ln() + 1.0);

    // Linear power and the dBm Jacobian dP/dx = P ln(10)/10.
    let log_jac = (std::f64::consts::LN_10 / 10.0).ln();
    let p: Vec<f64> = samples.iter().map(|x| 10f64.powf(x / 10.0)).collect();
    let ln_p: Vec<f64> = samples.iter().map(|x| x / 10.0 * std::f64::consts::LN_10).collect();
    let omega = stats::mean(&p);
    let mean_ln_p = stats::mean(&ln_p);
    let sum_ln_p: f64 = ln_p.iter().sum();

    let rayleigh_ll = -nf * omega.ln() - nf + sum_ln_p + nf * log_jac;

    let m = gamma_shape(omega.ln() - mean_ln_p);
    let nak_ll = nf * (m * m.ln() - ln_gamma(m) - m * omega.ln()) + m * sum_ln_p - m * nf + nf * log_jac;

    let mut by_aic = vec![
        candidate(
            MarginFamily::Gaussian,
            vec![("mean_dbm".into(), mean), ("sd_db".into(), var.sqrt())],
            gauss_ll,
            n,
        ),
        candidate(MarginFamily::Rayleigh, vec![("mean_power".into(), omega)], rayleigh_ll, n),
        candidate(
            MarginFamily::Nakagami,
            vec![("m".into(), m), ("mean_power".into(), omega)],
            nak_ll,
            n,
        ),
    ];
    by_aic.sort_by(|a, b| a.aic.total_cmp(&b.aic));
    let mut bic: Vec<&MarginCandidate> = by_aic.iter().collect();
    bic.sort_by(|a, b| a.bic.total_cmp(&b.bic));
    let by_bic = bic.iter().map(|c| c.family).collect();
    let tie = by_aic[1].aic - by_aic[0].aic < AIC_TIE;
    Ok(MarginRanking { by_aic, by_bic, tie })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivariateGaussian {
    pub mean_x: f64,
    pub mean_y: f64,
    pub sd_x: f64,
    pub sd_y: f64,
    pub rho: f64,
}

/// Moment estimates of a bivariate normal.
pub fn fit_bivariate_gaussian(x: &[f64], y: &[f64]) -> Result<BivariateGaussian> {
    if x.len() != y.len() {
        return Err(Error::domain("paired sequences differ in length"));
    }
    if x.len() < 2 {
        return Err(Error::TooFewSamples {
            what: "bivariate Gaussian fit",
            needed: 2,
            got: x.len(),
        });
    }
    let (vx, vy) = (stats::variance(x), stats::variance(y));
    if !(vx > 0.0 && vy > 0.0) {
        return Err(Error::Degenerate("zero variance in a baseline margin".into()));
    }
    let rho = stats::pearson_correlation(x, y)?;
    if rho.abs() >= 1.0 - 1e-12 {
        return Err(Error::Degenerate(format!("correlation {rho} is perfect; the Gaussian is singular")));
    }
    Ok(BivariateGaussian {
        mean_x: stats::mean(x),
        mean_y: stats::mean(y),
        sd_x: vx.sqrt(),
        sd_y: vy.sqrt(),
        rho,
    })
}

/// Standard bivariate normal CDF `P(Z1 <= a, Z2 <= b)` with correlation `rho`.
///
/// Integrates `phi(t) Phi((b - rho t) / sqrt(1 - rho^2))` up to `min(a, b)`
/// with adaptive Gauss–Kronrod, so deep-tail values keep relative accuracy.
pub fn bivariate_normal_cdf(a: f64, b: f64, rho: f64) -> f64 {
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        return 0.0;
    }
    if a == f64::INFINITY {
        return std_normal_cdf(b);
    }
    if b == f64::INFINITY {
        return std_normal_cdf(a);
    }
    if rho >= 1.0 {
        return std_normal_cdf(a.min(b));
    }
    if rho <= -1.0 {
        return (std_normal_cdf(a) - std_normal_cdf(-b)).max(0.0);
    }
    if rho == 0.0 {
        return std_normal_cdf(a) * std_normal_cdf(b);
    }
    let (lo_arg, hi_arg) = if a <= b { (a, b) } else { (b, a) };
    let s = (1.0 - rho * rho).sqrt();
    let f = |t: f64| std_normal_pdf(t) * std_normal_cdf((hi_arg - rho * t) / s);
    let lower = (lo_arg - 10.0).min(-40.0);
    let mut cuts = vec![lower];
    let kink = hi_arg / rho;
    if kink > lower && kink < lo_arg {
        cuts.push(kink);
    }
    cuts.push(lo_arg);
    let v: f64 = cuts
        .windows(2)
        .map(|w| quadrature::integrate(f, w[0], w[1], 1e-300, 1e-14))
        .sum();
    v.clamp(0.0, std_normal_cdf(lo_arg))
}

/// Joint CDF of the fitted Gaussian at dBm values `(x, y)`.
pub fn extrapolated_joint_cdf(p: &BivariateGaussian, x: f64, y: f64) -> f64 {
    bivariate_normal_cdf((x - p.mean_x) / p.sd_x, (y - p.mean_y) / p.sd_y, p.rho)
}
