//! Checks that a fitted bivariate tail model is a valid extreme-value model,
//! plus the surface error used to compare models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logistic::{self, LogisticModel};
use crate::quadrature;
use crate::stats;
use crate::transforms::{PickandsPoint, RadialCoordinate};

const MIN_POINTS_R0: usize = 100;
const MIN_RETAINED: usize = 30;
/// Angular grid size for the normalized Pickands density.
pub const DENSITY_GRID: usize = 2001;

/// Dependence between radius and angle among points beyond one cut-off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct R0Candidate {
    pub r0: f64,
    pub retained: usize,
    /// Pearson correlation of `r` with `omega`.
    pub corr: f64,
    /// Pearson correlation of `r` with the folded angle `|2 omega - 1|`.
    pub corr_folded: f64,
}

impl R0Candidate {
    pub fn statistic(&self) -> f64 {
        self.corr.abs().max(self.corr_folded.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct R0Selection {
    pub r0: f64,
    pub retained: usize,
    pub statistic: f64,
    pub profile: Vec<R0Candidate>,
}

fn corr_or_zero(a: &[f64], b: &[f64]) -> f64 {
    stats::pearson_correlation(a, b).unwrap_or(0.0)
}

/// Correlation profile over cut-offs at the 0%, 1%, ..., 99% empirical
/// quantiles of `r`, stopping once fewer than 30 points remain.
pub fn r0_profile(points: &[PickandsPoint]) -> Vec<R0Candidate> {
    let mut by_r: Vec<PickandsPoint> = points.to_vec();
    by_r.sort_by(|a, b| a.r.total_cmp(&b.r));
    let rs: Vec<f64> = by_r.iter().map(|p| p.r).collect();
    let mut out: Vec<R0Candidate> = Vec::new();
    for q in 0..100 {
        let c = stats::quantile_sorted(&rs, q as f64 / 100.0);
        let start = rs.partition_point(|&r| r <= c);
        let kept = &by_r[start..];
        if kept.len() < MIN_RETAINED {
            break;
        }
        if out.last().is_some_and(|p| p.r0 == c) {
            continue;
        }
        let r: Vec<f64> = kept.iter().map(|p| p.r).collect();
        let w: Vec<f64> = kept.iter().map(|p| p.omega).collect();
        let folded: Vec<f64> = w.iter().map(|w| (2.0 * w - 1.0).abs()).collect();
        out.push(R0Candidate {
            r0: c,
            retained: kept.len(),
            corr: corr_or_zero(&r, &w),
            corr_folded: corr_or_zero(&r, &folded),
        });
    }
    out
}

/// Most negative cut-off beyond which radius and angle are uncorrelated.
///
/// The statistic is the larger of `|corr(r, omega)|` and
/// `|corr(r, |2 omega - 1|)|`; the folded angle catches dependence in
/// exchangeable models, where `corr(r, omega)` vanishes by symmetry.
pub fn select_r0(points: &[PickandsPoint], critical: f64) -> Result<R0Selection> {
    if points.len() < MIN_POINTS_R0 {
        return Err(Error::TooFewSamples {
            what: "radial cut-off selection",
            needed: MIN_POINTS_R0,
            got: points.len(),
        });
    }
    if !(critical > 0.0 && critical < 1.0) {
        return Err(Error::domain(format!("critical value must lie in (0, 1), got {critical}")));
    }
    let profile = r0_profile(points);
    match profile.iter().find(|c| c.statistic() < critical) {
        Some(c) => Ok(R0Selection {
            r0: c.r0,
            retained: c.retained,
            statistic: c.statistic(),
            profile: profile.clone(),
        }),
        None => Err(Error::NoRadialCutoff {
            critical,
            candidates: profile.len(),
            profile,
        }),
    }
}

/// Fallback for when no cut-off meets `critical`: the most negative one
/// whose statistic is within two standard errors of zero, `2 / sqrt(k)`.
pub fn r0_within_noise(profile: &[R0Candidate], critical: f64) -> Option<R0Candidate> {
    profile
        .iter()
        .find(|c| c.statistic() < critical.max(2.0 / (c.retained as f64).sqrt()))
        .copied()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformityCheck {
    pub max_deviation: f64,
    pub bound: f64,
    pub retained: usize,
    pub pass: bool,
}

/// Compares the conditional survival of `r` beyond `r0` with `R / r0`,
/// the uniform law on `(r0, 0)`. Passes below the 5% KS bound `1.36/sqrt(k)`.
pub fn radial_uniformity(points: &[PickandsPoint], r0: f64) -> Result<UniformityCheck> {
    if !(r0 < 0.0) {
        return Err(Error::domain(format!("radial cut-off must be negative, got {r0}")));
    }
    let u: Vec<f64> = points.iter().filter(|p| p.r > r0).map(|p| p.r / r0).collect();
    if u.len() < MIN_RETAINED {
        return Err(Error::TooFewSamples {
            what: "radial uniformity check",
            needed: MIN_RETAINED,
            got: u.len(),
        });
    }
    let max_deviation = stats::ks_distance(&u, |v| v.clamp(0.0, 1.0));
    let bound = 1.36 / (u.len() as f64).sqrt();
    Ok(UniformityCheck {
        max_deviation,
        bound,
        retained: u.len(),
        pass: max_deviation < bound,
    })
}

/// Pickands density of the logistic model at `(omega, r)`: the Jacobian of
/// the chosen coordinates times the bivariate density at the inverse point.
pub fn pickands_density_logistic(omega: f64, r: f64, m: &LogisticModel, coord: RadialCoordinate) -> Result<f64> {
    if !(omega > 0.0 && omega < 1.0) {
        return Err(Error::domain(format!("angle must lie strictly inside (0, 1), got {omega}")));
    }
    if !(r < 0.0) {
        return Err(Error::domain(format!("radial component must be negative, got {r}")));
    }
    let f = coord.inverse(&PickandsPoint { omega, r })?;
    Ok(coord.jacobian(r) * logistic::log_density(f.x_tilde, f.y_tilde, m.alpha).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularDensity {
    pub omega: Vec<f64>,
    pub density: Vec<f64>,
    /// Normalizing constant, the integral of the unnormalized density.
    pub mu: f64,
    pub mean: f64,
    /// Mean coefficient of variation of the density across observed radii
    /// at fixed angles; 0 means no dependence on `r`.
    pub r_dependence_cv: f64,
}

/// Normalized angular density from the Pickands density averaged over the
/// radii of the retained points, on a 2001-point grid.
pub fn h_l_density(retained: &[PickandsPoint], m: &LogisticModel, coord: RadialCoordinate) -> Result<AngularDensity> {
    if retained.is_empty() {
        return Err(Error::TooFewSamples {
            what: "angular density",
            needed: 1,
            got: 0,
        });
    }
    let n = DENSITY_GRID;
    let h = 1.0 / (n - 1) as f64;
    let omega: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let mut raw = vec![0.0; n];
    for (j, &w) in omega.iter().enumerate().skip(1).take(n - 2) {
        let mut acc = 0.0;
        for p in retained {
            acc += pickands_density_logistic(w, p.r, m, coord)?;
        }
        raw[j] = acc / retained.len() as f64;
    }
    let mu = quadrature::simpson(&raw, h);
    if !(mu > 0.0) {
        return Err(Error::Degenerate(format!("Pickands density integrates to {mu}")));
    }
    let density: Vec<f64> = raw.iter().map(|v| v / mu).collect();
    let weighted: Vec<f64> = density.iter().zip(&omega).map(|(d, w)| d * w).collect();
    let mean = quadrature::simpson(&weighted, h);

    let mut cvs = Vec::new();
    for b in 1..10 {
        let w = b as f64 / 10.0;
        let vals: Vec<f64> = retained
            .iter()
            .map(|p| pickands_density_logistic(w, p.r, m, coord))
            .collect::<Result<_>>()?;
        let mean_v = stats::mean(&vals);
        if vals.len() > 1 && mean_v > 0.0 {
            cvs.push(stats::variance(&vals).sqrt() / mean_v);
        }
    }
    let r_dependence_cv = if cvs.is_empty() { 0.0 } else { stats::mean(&cvs) };
    Ok(AngularDensity {
        omega,
        density,
        mu,
        mean,
        r_dependence_cv,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanConstraint {
    pub mean: f64,
    pub tol: f64,
    /// `tol - |mean - 0.5|`; negative when the check fails.
    pub margin: f64,
    pub pass: bool,
}

pub fn mean_constraint_check(mean: f64, tol: f64) -> MeanConstraint {
    let margin = tol - (mean - 0.5).abs();
    MeanConstraint {
        mean,
        tol,
        margin,
        pass: margin >= 0.0,
    }
}

/// Values on a rectangular grid, stored row-major with `x` varying slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<f64>,
}

impl Surface {
    pub fn from_fn(xs: &[f64], ys: &[f64], f: impl Fn(f64, f64) -> f64) -> Self {
        let values = xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            values,
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ys.len() + j]
    }

    pub fn max_abs_difference(&self, other: &Surface) -> Result<f64> {
        check_same_grid(self, other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

fn check_same_grid(a: &Surface, b: &Surface) -> Result<()> {
    if a.xs != b.xs || a.ys != b.ys || a.values.len() != b.values.len() || a.values.len() != a.xs.len() * a.ys.len() {
        return Err(Error::domain("surfaces are defined on different grids"));
    }
    Ok(())
}

/// Root mean squared pointwise difference between two surfaces.
pub fn rmse_joint_cdf(model: &Surface, empirical: &Surface) -> Result<f64> {
    check_same_grid(model, empirical)?;
    if model.values.is_empty() {
        return Err(Error::domain("empty surface"));
    }
    let ss: f64 = model
        .values
        .iter()
        .zip(&empirical.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((ss / model.values.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<PickandsPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| PickandsPoint {
                omega: rng.random(),
                r: -rng.random::<f64>(),
            })
            .collect()
    }

    #[test]
    fn noise_fallback_takes_first_candidate_within_two_standard_errors() {
        let c = |r0: f64, retained: usize, corr_folded: f64| R0Candidate {
            r0,
            retained,
            corr: 0.0,
            corr_folded,
        };
        // 2/sqrt(400) = 0.1, 2/sqrt(100) = 0.2
        let profile = [c(-3.0, 1600, 0.3), c(-2.0, 400, 0.12), c(-1.0, 100, 0.15), c(-0.5, 50, 0.01)];
        assert_eq!(r0_within_noise(&profile, 0.05).unwrap().r0, -1.0);
        assert_eq!(r0_within_noise(&profile, 0.13).unwrap().r0, -2.0);
        assert!(r0_within_noise(&profile[..2], 0.05).is_none());
    }

    #[test]
    fn independent_points_keep_most_negative_cutoff() {
        let pts = random_points(20_000, 1);
        let sel = select_r0(&pts, 0.05).unwrap();
        assert_eq!(sel.r0, sel.profile[0].r0);
        assert_eq!(sel.retained, pts.len() - 1);
    }

    #[test]
    fn perfectly_dependent_points_fail() {
        let pts: Vec<PickandsPoint> = (0..500)
            .map(|i| {
                let w = (i as f64 + 0.5) / 500.0;
                PickandsPoint { omega: w, r: w - 1.0 }
            })
            .collect();
        match select_r0(&pts, 0.05) {
            Err(Error::NoRadialCutoff { profile, .. }) => assert!(!profile.is_empty()),
            other => panic!("expected failure, got {other:?}"),
        }
        assert!(select_r0(&pts[..50], 0.05).is_err());
    }

    #[test]
    fn larger_critical_never_moves_cutoff_inward() {
        // Angle depends on radius only for r < -0.5.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<PickandsPoint> = (0..5000)
            .map(|_| {
                let r = -rng.random::<f64>();
                let w: f64 = rng.random();
                let omega = if r < -0.5 { 0.5 + (w - 0.5) * (1.0 + r) } else { w };
                PickandsPoint { omega, r }
            })
            .collect();
        let mut last = f64::INFINITY;
        for c in [0.02, 0.05, 0.1, 0.2, 0.5] {
            if let Ok(s) = select_r0(&pts, c) {
                assert!(s.r0 <= last);
                last = s.r0;
            }
        }
        assert!(last.is_finite());
    }

    #[test]
    fn uniformity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r0 = -0.4;
        let pts: Vec<PickandsPoint> = (0..10_000)
            .map(|_| PickandsPoint { omega: 0.5, r: r0 * rng.random::<f64>() })
            .collect();
        let u = radial_uniformity(&pts, r0).unwrap();
        assert!(u.pass && u.max_deviation < 0.02);
        let half: Vec<PickandsPoint> = (0..100).map(|_| PickandsPoint { omega: 0.5, r: r0 / 2.0 }).collect();
        let u = radial_uniformity(&half, r0).unwrap();
        assert!((u.max_deviation - 0.5).abs() < 1e-12 && !u.pass);
        assert!(radial_uniformity(&[], r0).is_err());
    }

    #[test]
    fn pickands_density_properties() {
        let m = LogisticModel::new(0.5).unwrap();
        for coord in [RadialCoordinate::SumNorm { n: 50 }, RadialCoordinate::Reciprocal] {
            let a = pickands_density_logistic(0.3, -0.1, &m, coord).unwrap();
            let b = pickands_density_logistic(0.7, -0.1, &m, coord).unwrap();
            assert!((a - b).abs() <= 1e-12 * a);
            assert!(pickands_density_logistic(0.0, -0.1, &m, coord).is_err());
            assert!(pickands_density_logistic(1.0, -0.1, &m, coord).is_err());
        }
    }

    #[test]
    fn pickands_density_matches_finite_difference() {
        let m = LogisticModel::new(0.5).unwrap();
        let n = 40;
        let coord = RadialCoordinate::SumNorm { n };
        let (omega, r) = (0.5, -0.1);
        let f = coord.inverse(&PickandsPoint { omega, r }).unwrap();
        let g = |x: f64, y: f64| logistic::g_logistic(x, y, &m);
        let (x, y) = (f.x_tilde, f.y_tilde);
        let (hx, hy) = (1e-4 * x, 1e-4 * y);
        let fd = (g(x + hx, y + hy) - g(x + hx, y - hy) - g(x - hx, y + hy) + g(x - hx, y - hy)) / (4.0 * hx * hy);
        let phi = pickands_density_logistic(omega, r, &m, coord).unwrap();
        assert!((phi - r.abs() * fd).abs() < 1e-5 * phi);
    }

    #[test]
    fn independence_limit_has_no_mixed_term() {
        let m = LogisticModel::new(1.0).unwrap();
        let coord = RadialCoordinate::Reciprocal;
        let (omega, r) = (0.3, -0.2);
        let f = coord.inverse(&PickandsPoint { omega, r }).unwrap();
        let (x, y) = (f.x_tilde, f.y_tilde);
        let expected = coord.jacobian(r) * (-1.0 / x - 1.0 / y).exp() / (x * x * y * y);
        let phi = pickands_density_logistic(omega, r, &m, coord).unwrap();
        assert!((phi - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn symmetric_sample_gives_half_mean_and_unit_mass() {
        let m = LogisticModel::new(0.7).unwrap();
        let pts: Vec<PickandsPoint> = (1..40)
            .map(|i| PickandsPoint { omega: 0.5, r: -(i as f64) / 200.0 })
            .collect();
        let d = h_l_density(&pts, &m, RadialCoordinate::Reciprocal).unwrap();
        assert!((d.mean - 0.5).abs() < 1e-9);
        let h = 1.0 / (DENSITY_GRID - 1) as f64;
        assert!((quadrature::simpson(&d.density, h) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mean_constraint_examples() {
        assert!(mean_constraint_check(0.5001, 0.05).pass);
        assert!(mean_constraint_check(0.5064, 0.05).pass);
        let c = mean_constraint_check(0.60, 0.05);
        assert!(!c.pass && c.margin < 0.0);
    }

    #[test]
    fn rmse_examples() {
        let xs = [0.0, 1.0];
        let ys = [0.0, 1.0, 2.0];
        let a = Surface::from_fn(&xs, &ys, |x, y| 0.1 * x + 0.2 * y);
        assert_eq!(rmse_joint_cdf(&a, &a).unwrap(), 0.0);
        let b = Surface::from_fn(&xs, &ys, |x, y| 0.1 * x + 0.2 * y + 0.1);
        assert!((rmse_joint_cdf(&b, &a).unwrap() - 0.1).abs() < 1e-12);
        let c = Surface::from_fn(&xs, &[0.0], |_, _| 0.0);
        assert!(rmse_joint_cdf(&a, &c).is_err());
    }
}
