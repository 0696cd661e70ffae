//! Threshold choice from mean-residual-life and parameter-stability curves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::ugpd;

/// Fewest exceedances a threshold needs before it is fitted.
pub const EXCEEDANCE_FLOOR: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrlPoint {
    pub u: f64,
    pub mean_excess: f64,
    pub count: usize,
}

/// Shape and modified scale fitted at one threshold.
///
/// The modified scale is `sigma_tilde + xi * u`, which does not depend on
/// `u` once the depths below `u` follow a GPD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityPoint {
    pub u: f64,
    pub xi_hat: f64,
    pub sigma_star: f64,
    pub n_exc: usize,
    pub xi_se: f64,
    pub sigma_star_se: f64,
    /// Why the threshold could not be fitted, if it could not.
    pub failure: Option<String>,
}

impl StabilityPoint {
    pub fn is_fitted(&self) -> bool {
        self.failure.is_none()
    }
}

fn depths_below(minima: &[f64], u: f64) -> Vec<f64> {
    minima.iter().filter(|&&x| x < u).map(|&x| u - x).collect()
}

/// Mean depth below each threshold; thresholds with fewer than `min_count`
/// samples below them are omitted.
pub fn mrl_curve(minima: &[f64], thresholds: &[f64], min_count: usize) -> Result<Vec<MrlPoint>> {
    if thresholds.is_empty() {
        return Err(Error::domain("empty threshold grid"));
    }
    let min_count = min_count.max(1);
    let mut out = Vec::new();
    for &u in thresholds {
        let l = depths_below(minima, u);
        if l.len() >= min_count {
            out.push(MrlPoint {
                u,
                mean_excess: stats::mean(&l),
                count: l.len(),
            });
        }
    }
    Ok(out)
}

fn stability_point(minima: &[f64], u: f64, floor: usize) -> StabilityPoint {
    let l = depths_below(minima, u);
    let n_exc = l.len();
    let failed = |why: String| StabilityPoint {
        u,
        xi_hat: f64::NAN,
        sigma_star: f64::NAN,
        n_exc,
        xi_se: f64::NAN,
        sigma_star_se: f64::NAN,
        failure: Some(why),
    };
    if n_exc < floor {
        return failed(format!("{n_exc} exceedances, fewer than {floor}"));
    }
    match ugpd::fit_gpd_mle(&l) {
        Ok(fit) => {
            let xi = fit.params.xi;
            let var_star = fit.sigma_se.powi(2) + u * u * fit.xi_se.powi(2) + 2.0 * u * fit.xi_sigma_cov;
            StabilityPoint {
                u,
                xi_hat: xi,
                sigma_star: fit.params.sigma_tilde + xi * u,
                n_exc,
                xi_se: fit.xi_se,
                sigma_star_se: var_star.max(0.0).sqrt(),
                failure: None,
            }
        }
        Err(e) => failed(e.to_string()),
    }
}

/// GPD fit at every threshold. Thresholds that cannot be fitted are
/// returned flagged rather than dropped. Output order follows `thresholds`.
pub fn stability_curve(minima: &[f64], thresholds: &[f64], floor: usize) -> Vec<StabilityPoint> {
    thresholds
        .par_iter()
        .map(|&u| stability_point(minima, u, floor))
        .collect()
}

fn line_fit(points: &[(f64, f64)]) -> Result<(f64, f64, f64, f64)> {
    if points.len() < 3 {
        return Err(Error::TooFewSamples {
            what: "linearity check",
            needed: 3,
            got: points.len(),
        });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::domain("all abscissae are equal"));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok((mx, my, sxx, sxy / sxx))
}

/// Coefficient of determination of the least-squares line.
///
/// A constant response is fitted perfectly by a flat line and gives 1.
pub fn r_squared(points: &[(f64, f64)]) -> Result<f64> {
    let (mx, my, _, slope) = line_fit(points)?;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum();
    if ss_tot == 0.0 {
        return Ok(1.0);
    }
    Ok((1.0 - ss_res / ss_tot).clamp(0.0, 1.0))
}

/// R² of a line fit after removing the residual variation that sampling
/// noise alone would produce.
///
/// `se` holds the standard error of each response. The expected residual
/// sum of squares of a correct linear model is `sum se_i^2 (1 - h_ii)`, with
/// `h_ii` the leverages; only the excess over that counts against the fit.
pub fn noise_adjusted_r_squared(points: &[(f64, f64)], se: &[f64]) -> Result<f64> {
    let (mx, my, sxx, slope) = line_fit(points)?;
    let n = points.len() as f64;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if ss_tot == 0.0 {
        return Ok(1.0);
    }
    let mut ss_res = 0.0;
    let mut expected = 0.0;
    for (p, s) in points.iter().zip(se) {
        ss_res += (p.1 - my - slope * (p.0 - mx)).powi(2);
        let h = 1.0 / n + (p.0 - mx).powi(2) / sxx;
        if s.is_finite() {
            expected += s * s * (1.0 - h);
        }
    }
    Ok((1.0 - (ss_res - expected).max(0.0) / ss_tot).clamp(0.0, 1.0))
}

/// Linearity of both stability curves at one candidate threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateCheck {
    pub u: f64,
    pub r2_xi: f64,
    pub r2_sigma_star: f64,
    pub points: usize,
    /// Largest z-score of the step in shape or modified scale from the
    /// candidate to the next fitted threshold below it.
    pub step_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgDiagnostics {
    pub mg: usize,
    pub mrl: Vec<MrlPoint>,
    /// R² of the MRL curve at and below the chosen threshold.
    pub mrl_r2: Option<f64>,
    pub stability: Vec<StabilityPoint>,
    pub checks: Vec<CandidateCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSelection {
    /// `None` when no threshold satisfies the criterion; the curves are
    /// still returned for inspection.
    pub u_opt: Option<f64>,
    pub r2_min: f64,
    pub grid: Vec<f64>,
    pub per_mg: Vec<MgDiagnostics>,
}

impl ThresholdSelection {
    pub fn require(&self) -> Result<f64> {
        self.u_opt.ok_or(Error::NoOptimumThreshold { r2_min: self.r2_min })
    }
}

/// `count` equally spaced thresholds between the `lo` and `hi` empirical
/// quantiles of the minima, ordered from the highest down.
pub fn default_grid(minima: &[f64], lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if minima.is_empty() {
        return Err(Error::TooFewSamples {
            what: "threshold grid",
            needed: 1,
            got: 0,
        });
    }
    let s = stats::sorted(minima);
    let (a, b) = (stats::quantile_sorted(&s, lo), stats::quantile_sorted(&s, hi));
    if count < 2 || !(b > a) {
        return Ok(vec![b]);
    }
    Ok((0..count)
        .map(|i| b - (b - a) * i as f64 / (count - 1) as f64)
        .collect())
}

/// Largest step z-score a candidate may show against its lower neighbour.
pub const MAX_STEP_Z: f64 = 4.0;

/// z-score of the difference between estimates from nested samples.
///
/// Fits at adjacent thresholds share most of their data, so the variance of
/// their difference is about the difference of their variances rather than
/// the sum.
fn nested_step_z(a: f64, se_a: f64, b: f64, se_b: f64) -> f64 {
    let var = (se_a * se_a - se_b * se_b).abs();
    let d = (a - b).abs();
    if d == 0.0 {
        return 0.0;
    }
    if !var.is_finite() {
        return 0.0;
    }
    d / var.max(f64::MIN_POSITIVE).sqrt()
}

fn check_candidate(curve: &[StabilityPoint], upto: usize) -> Option<CandidateCheck> {
    let pts: Vec<&StabilityPoint> = curve[upto..].iter().filter(|p| p.is_fitted()).collect();
    if pts.len() < 3 || !curve[upto].is_fitted() {
        return None;
    }
    let xi: Vec<(f64, f64)> = pts.iter().map(|p| (p.u, p.xi_hat)).collect();
    let xi_se: Vec<f64> = pts.iter().map(|p| p.xi_se).collect();
    let ss: Vec<(f64, f64)> = pts.iter().map(|p| (p.u, p.sigma_star)).collect();
    let ss_se: Vec<f64> = pts.iter().map(|p| p.sigma_star_se).collect();
    let (c, next) = (pts[0], pts[1]);
    Some(CandidateCheck {
        u: c.u,
        r2_xi: noise_adjusted_r_squared(&xi, &xi_se).ok()?,
        r2_sigma_star: noise_adjusted_r_squared(&ss, &ss_se).ok()?,
        points: pts.len(),
        step_z: nested_step_z(c.xi_hat, c.xi_se, next.xi_hat, next.xi_se)
            .max(nested_step_z(c.sigma_star, c.sigma_star_se, next.sigma_star, next.sigma_star_se)),
    })
}

/// Highest grid threshold at which, for every declustering run length, the
/// fitted shape and modified scale are linear in `u` at and below it, and
/// neither estimate jumps between the candidate and the next threshold down
/// by more than [`MAX_STEP_Z`] nested standard errors.
///
/// `minima_by_mg` pairs each run length with its cluster minima (dBm).
/// With `r2_min <= 0` the criterion is vacuous and the highest threshold
/// fitted for every run length is returned.
pub fn select_threshold(
    minima_by_mg: &[(usize, Vec<f64>)],
    grid: &[f64],
    r2_min: f64,
    floor: usize,
) -> Result<ThresholdSelection> {
    if grid.is_empty() {
        return Err(Error::domain("empty threshold grid"));
    }
    if minima_by_mg.is_empty() {
        return Err(Error::domain("no declustering run lengths given"));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(|a, b| b.total_cmp(a));
    grid.dedup();

    let mut per_mg = Vec::with_capacity(minima_by_mg.len());
    for (mg, minima) in minima_by_mg {
        let stability = stability_curve(minima, &grid, floor);
        let checks: Vec<CandidateCheck> = (0..grid.len())
            .filter_map(|i| check_candidate(&stability, i))
            .collect();
        per_mg.push(MgDiagnostics {
            mg: *mg,
            mrl: mrl_curve(minima, &grid, floor)?,
            mrl_r2: None,
            stability,
            checks,
        });
    }

    let passes = |d: &MgDiagnostics, i: usize| -> bool {
        if r2_min <= 0.0 {
            return d.stability[i].is_fitted();
        }
        d.checks
            .iter()
            .find(|c| c.u == grid[i])
            .is_some_and(|c| c.r2_xi > r2_min && c.r2_sigma_star > r2_min && c.step_z <= MAX_STEP_Z)
    };
    let u_opt = (0..grid.len())
        .find(|&i| per_mg.iter().all(|d| passes(d, i)))
        .map(|i| grid[i]);

    if let Some(u) = u_opt {
        for d in &mut per_mg {
            let pts: Vec<(f64, f64)> = d
                .mrl
                .iter()
                .filter(|p| p.u <= u)
                .map(|p| (p.u, p.mean_excess))
                .collect();
            d.mrl_r2 = r_squared(&pts).ok();
        }
    }
    Ok(ThresholdSelection {
        u_opt,
        r2_min,
        grid,
        per_mg,
    })
}
