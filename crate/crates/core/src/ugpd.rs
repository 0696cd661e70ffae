//! Maximum-likelihood GPD fitting and probability-plot diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpd::{self, GpdParams};
use crate::optim::{self, BfgsOptions};
use crate::stats;

/// Smallest sample the MLE accepts.
pub const MIN_EXCESSES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    QuasiNewton,
    Simplex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdFit {
    /// Shape and scale; threshold 0 and exceedance probability 1 until the
    /// caller attaches them.
    pub params: GpdParams,
    pub xi_se: f64,
    pub sigma_se: f64,
    /// Covariance of the shape and scale estimates.
    pub xi_sigma_cov: f64,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub method: FitMethod,
}

/// Mean log-likelihood and its gradient in `(xi, ln sigma)`.
///
/// Returns `-inf` with a zero gradient outside the support or for `xi <= -1`,
/// where the likelihood is unbounded.
fn mean_loglik_and_grad(l: &[f64], xi: f64, log_sigma: f64) -> (f64, [f64; 2]) {
    if xi <= -1.0 || !xi.is_finite() || !log_sigma.is_finite() {
        return (f64::NEG_INFINITY, [0.0; 2]);
    }
    let sigma = log_sigma.exp();
    let n = l.len() as f64;
    let (mut ll, mut gx, mut gs) = (0.0, 0.0, 0.0);
    let small = xi.abs() < 1e-6;
    for &li in l {
        let z = li / sigma;
        let w = 1.0 + xi * z;
        if w <= 0.0 {
            return (f64::NEG_INFINITY, [0.0; 2]);
        }
        if small {
            let z2 = z * z;
            let z3 = z2 * z;
            ll += -z + xi * (z2 / 2.0 - z) + xi * xi * (z2 / 2.0 - z3 / 3.0);
            gx += z2 / 2.0 - z + xi * (z2 - 2.0 * z3 / 3.0) + xi * xi * (0.75 * z2 * z2 - z3);
        } else {
            let lw = (xi * z).ln_1p();
            ll += -(1.0 + 1.0 / xi) * lw;
            gx += lw / (xi * xi) - (1.0 + 1.0 / xi) * z / w;
        }
        gs += -1.0 + (xi + 1.0) * z / w;
    }
    (ll / n - log_sigma, [gx / n, gs / n])
}

/// Fits `(xi, sigma_tilde)` by maximum likelihood.
pub fn fit_gpd_mle(excesses: &[f64]) -> Result<GpdFit> {
    if excesses.len() < MIN_EXCESSES {
        return Err(Error::TooFewSamples {
            what: "GPD fit",
            needed: MIN_EXCESSES,
            got: excesses.len(),
        });
    }
    if let Some(&bad) = excesses.iter().find(|&&l| !(l >= 0.0 && l.is_finite())) {
        return Err(Error::domain(format!("invalid exceedance depth {bad}")));
    }
    let m = stats::mean(excesses);
    let v = stats::variance(excesses);
    if !(v > 0.0) || !(m > 0.0) {
        return Err(Error::Degenerate(
            "all exceedance depths are equal; likelihood has no interior maximum".into(),
        ));
    }
    let l_max = excesses.iter().cloned().fold(0.0, f64::max);

    let ratio = m * m / v;
    let mut xi0 = (0.5 * (1.0 - ratio)).clamp(-0.9, 0.9);
    let sigma0 = 0.5 * m * (1.0 + ratio);
    if xi0 < 0.0 && 1.0 + xi0 * l_max / sigma0 <= 1e-6 {
        xi0 = 0.0;
    }
    let start = [xi0, sigma0.ln()];

    let neg = |th: &[f64]| {
        let (f, g) = mean_loglik_and_grad(excesses, th[0], th[1]);
        if f == f64::NEG_INFINITY {
            (f64::INFINITY, vec![0.0, 0.0])
        } else {
            (-f, vec![-g[0], -g[1]])
        }
    };
    let qn = optim::bfgs(neg, &start, BfgsOptions::default());
    let (theta, iterations, converged, method) = if qn.converged {
        (qn.x.clone(), qn.iterations, true, FitMethod::QuasiNewton)
    } else {
        let fv = |th: &[f64]| neg(th).0;
        let from = if qn.f.is_finite() { qn.x.clone() } else { start.to_vec() };
        let nm = optim::nelder_mead(fv, &from, &[0.1, 0.1], 500, 1e-15);
        let polished = optim::bfgs(neg, &nm.x, BfgsOptions::default());
        let ok = polished.converged;
        let best = if polished.f <= nm.f { polished.x } else { nm.x };
        (best, qn.iterations + nm.iterations + polished.iterations, ok, FitMethod::Simplex)
    };

    let xi = theta[0];
    let sigma = theta[1].exp();
    let loglik = gpd::log_likelihood_sum(excesses, xi, sigma);
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            xi,
            sigma,
            loglik,
        });
    }
    let (xi_se, sigma_se, xi_sigma_cov) = standard_errors(excesses, xi, sigma);
    Ok(GpdFit {
        params: GpdParams::shape_scale(xi, sigma)?,
        xi_se,
        sigma_se,
        xi_sigma_cov,
        loglik,
        iterations,
        converged,
        method,
    })
}

/// Gradient of the total log-likelihood in `(xi, sigma)`.
fn total_grad(l: &[f64], xi: f64, sigma: f64) -> Option<[f64; 2]> {
    let (f, g) = mean_loglik_and_grad(l, xi, sigma.ln());
    if !f.is_finite() {
        return None;
    }
    let n = l.len() as f64;
    Some([g[0] * n, g[1] * n / sigma])
}

/// Standard errors from the inverse observed information, with the
/// Hessian taken by central differences of the analytic gradient.
fn standard_errors(l: &[f64], xi: f64, sigma: f64) -> (f64, f64, f64) {
    let hx = 1e-5 * xi.abs().max(0.1);
    let hs = 1e-5 * sigma;
    let grads = (
        total_grad(l, xi + hx, sigma),
        total_grad(l, xi - hx, sigma),
        total_grad(l, xi, sigma + hs),
        total_grad(l, xi, sigma - hs),
    );
    let (Some(gxp), Some(gxm), Some(gsp), Some(gsm)) = grads else {
        return (f64::NAN, f64::NAN, f64::NAN);
    };
    let hxx = (gxp[0] - gxm[0]) / (2.0 * hx);
    let hss = (gsp[1] - gsm[1]) / (2.0 * hs);
    let hxs = 0.5 * ((gxp[1] - gxm[1]) / (2.0 * hx) + (gsp[0] - gsm[0]) / (2.0 * hs));
    // Observed information is the negated Hessian.
    let (a, b, c) = (-hxx, -hxs, -hss);
    let det = a * c - b * b;
    if !(det > 0.0 && a > 0.0) {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    ((c / det).sqrt(), (a / det).sqrt(), -b / det)
}

/// Probability-plot points `(i/(n+1), G(l_(i)))` over the sorted depths.
pub fn pp_points(excesses: &[f64], p: &GpdParams) -> Vec<(f64, f64)> {
    let sorted = stats::sorted(excesses);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let model = gpd::gpd_cdf_unchecked(l.max(0.0), p.xi, p.sigma_tilde);
            ((i + 1) as f64 / (n + 1.0), model)
        })
        .collect()
}

/// Quantile-plot points `(G^-1(i/(n+1)), l_(i))` over the sorted depths.
pub fn qq_points(excesses: &[f64], p: &GpdParams) -> Vec<(f64, f64)> {
    let sorted = stats::sorted(excesses);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let q = gpd::gpd_quantile_unchecked((i + 1) as f64 / (n + 1.0), p.xi, p.sigma_tilde);
            (q, l)
        })
        .collect()
}

/// Number of depths at or beyond a finite support endpoint.
pub fn beyond_endpoint_count(excesses: &[f64], p: &GpdParams) -> usize {
    let end = gpd::gpd_support_endpoint(p);
    excesses.iter().filter(|&&l| l >= end).count()
}

/// Maximum and root-mean-square vertical distance from `y = x`.
pub fn diagonal_deviation(points: &[(f64, f64)]) -> (f64, f64) {
    if points.is_empty() {
        return (0.0, 0.0);
    }
    let mut max: f64 = 0.0;
    let mut ss = 0.0;
    for &(x, y) in points {
        let d = y - x;
        max = max.max(d.abs());
        ss += d * d;
    }
    (max, (ss / points.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(xi: f64, sigma: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| gpd::gpd_quantile_unchecked(rng.random::<f64>(), xi, sigma))
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let l = sample(-0.2, 5.0, 500, 3);
        for &(xi, s) in &[(-0.2, 1.6), (0.3, 1.0), (1e-7, 1.5), (-3e-7, 2.0), (0.05, 1.2)] {
            let (_, g) = mean_loglik_and_grad(&l, xi, s);
            let h = 1e-6;
            let fx = |a: f64, b: f64| mean_loglik_and_grad(&l, a, b).0;
            let dx = (fx(xi + h, s) - fx(xi - h, s)) / (2.0 * h);
            let ds = (fx(xi, s + h) - fx(xi, s - h)) / (2.0 * h);
            assert!((g[0] - dx).abs() < 1e-4 * dx.abs().max(1e-3), "{xi} {s}: {} vs {dx}", g[0]);
            assert!((g[1] - ds).abs() < 1e-4 * ds.abs().max(1e-3), "{xi} {s}: {} vs {ds}", g[1]);
        }
    }

    #[test]
    fn mean_loglik_matches_direct_sum() {
        let l = sample(0.1, 2.0, 200, 9);
        for &xi in &[0.1, 5e-7, 0.3] {
            let direct = gpd::gpd_log_likelihood(&l, xi, 2.0).unwrap() / l.len() as f64;
            let (f, _) = mean_loglik_and_grad(&l, xi, 2f64.ln());
            assert!((f - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn recovers_generator() {
        let fit = fit_gpd_mle(&sample(-0.2, 5.0, 100_000, 11)).unwrap();
        assert!((fit.params.xi + 0.2).abs() < 0.03);
        assert!((fit.params.sigma_tilde / 5.0 - 1.0).abs() < 0.03);
        // Asymptotic sd of xi at n=1e5 is (1+xi)/sqrt(n) ~ 0.0025.
        assert!(fit.xi_se > 0.001 && fit.xi_se < 0.005);
    }

    #[test]
    fn exponential_data_gives_small_shape() {
        let fit = fit_gpd_mle(&sample(0.0, 1.0, 100_000, 5)).unwrap();
        assert!(fit.params.xi.abs() < 0.02);
    }

    #[test]
    fn degenerate_and_small_inputs_fail() {
        assert!(matches!(fit_gpd_mle(&[1.0; 50]), Err(Error::Degenerate(_))));
        assert!(matches!(fit_gpd_mle(&[1.0; 5]), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn optimum_beats_random_starts() {
        let l = sample(0.15, 3.0, 2000, 21);
        let fit = fit_gpd_mle(&l).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut tried = 0;
        while tried < 64 {
            let xi = rng.random_range(-0.9..1.0);
            let s = rng.random_range(0.1..20.0);
            let ll = gpd::log_likelihood_sum(&l, xi, s);
            if ll.is_finite() {
                assert!(fit.loglik >= ll - 1e-9);
                tried += 1;
            }
        }
        let (_, g) = mean_loglik_and_grad(&l, fit.params.xi, fit.params.sigma_tilde.ln());
        assert!(g[0].hypot(g[1]) < 1e-6);
    }

    #[test]
    fn pp_qq_plot_positions() {
        let p = GpdParams::shape_scale(-0.3, 2.0).unwrap();
        let one = pp_points(&[1.0], &p);
        assert_eq!(one[0].0, 0.5);
        assert_eq!(one[0].1, gpd::gpd_cdf(1.0, &p).unwrap());
        let n = 99;
        let perfect: Vec<f64> = (1..=n)
            .map(|i| gpd::gpd_quantile(i as f64 / (n as f64 + 1.0), &p).unwrap())
            .collect();
        let (max_pp, _) = diagonal_deviation(&pp_points(&perfect, &p));
        let (max_qq, _) = diagonal_deviation(&qq_points(&perfect, &p));
        assert!(max_pp < 1e-12 && max_qq < 1e-12);
    }

    #[test]
    fn generator_matched_plots_hug_diagonal() {
        let p = GpdParams::shape_scale(-0.2, 5.0).unwrap();
        let l = sample(-0.2, 5.0, 1_000_000, 4);
        let (max_pp, _) = diagonal_deviation(&pp_points(&l, &p));
        assert!(max_pp < 0.02);
        let qq = qq_points(&l, &p);
        let k = qq.len();
        let worst = qq[k / 100..k - k / 100]
            .iter()
            .map(|(m, e)| ((e - m) / m).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.05);
    }

    #[test]
    fn diagonal_deviation_examples() {
        assert_eq!(diagonal_deviation(&[(0.5, 0.5)]), (0.0, 0.0));
        let (m, r) = diagonal_deviation(&[(0.0, 0.1), (1.0, 0.9)]);
        assert!((m - 0.1).abs() < 1e-15 && (r - 0.1).abs() < 1e-15);
    }
}
