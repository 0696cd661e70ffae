//! Synthetic traces with a known joint lower tail, and brute-force oracles.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpd::{self, GpdParams};
use crate::series::PowerSeries;
use crate::transforms::FrechetPair;
use crate::validation::Surface;

/// Log of a positive-stable variable with Laplace transform `exp(-t^alpha)`,
/// scaled by `alpha` (Kanter's representation).
///
/// Returned as `alpha * ln S`, which stays finite as `alpha -> 0`.
fn scaled_log_positive_stable(alpha: f64, rng: &mut impl Rng) -> f64 {
    if alpha >= 1.0 {
        return 0.0;
    }
    let u: f64 = rng.random::<f64>() * std::f64::consts::PI;
    let w: f64 = Exp1.sample(rng);
    let u = u.max(f64::MIN_POSITIVE);
    alpha * (alpha * u).sin().ln() - u.sin().ln() + (1.0 - alpha) * (((1.0 - alpha) * u).sin().ln() - w.ln())
}

/// Exact draws from the bivariate logistic extreme-value distribution with
/// unit Fréchet margins.
///
/// With `S` positive stable of index `alpha` and `E1, E2` unit exponential,
/// `(S/E1)^alpha, (S/E2)^alpha` has joint CDF `exp(-(x^(-1/alpha) + y^(-1/alpha))^alpha)`.
pub fn gen_bivariate_logistic_frechet(alpha: f64, n: usize, seed: u64) -> Result<Vec<FrechetPair>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let s = scaled_log_positive_stable(alpha, &mut rng);
        let e1: f64 = Exp1.sample(&mut rng);
        let e2: f64 = Exp1.sample(&mut rng);
        let x = (s - alpha * e1.ln()).exp().clamp(f64::MIN_POSITIVE, f64::MAX);
        let y = (s - alpha * e2.ln()).exp().clamp(f64::MIN_POSITIVE, f64::MAX);
        out.push(FrechetPair::new(x, y, i as i64)?);
    }
    Ok(out)
}

/// Shape of the benign bulk and the fade layout of a synthetic trace pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceLayout {
    /// Window length in samples; at most one fade per receiver per window.
    pub window_len: usize,
    /// Fraction of windows carrying a fade on one receiver only.
    pub marginal_fraction: f64,
    /// Bulk mean above each threshold (dB).
    pub bulk_offset: f64,
    pub bulk_sd: f64,
    /// Correlation of the two bulk components.
    pub bulk_rho: f64,
    pub resolution: f64,
}

impl Default for TraceLayout {
    fn default() -> Self {
        Self {
            window_len: 100,
            marginal_fraction: 0.02,
            bulk_offset: 8.0,
            bulk_sd: 4.0,
            bulk_rho: 0.3,
            resolution: 1e-3,
        }
    }
}

/// What the generator put into the traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub gpd_x: GpdParams,
    pub gpd_y: GpdParams,
    pub alpha: f64,
    pub seed: u64,
    pub n_total: usize,
    pub tail_fraction: f64,
    pub layout: TraceLayout,
    /// Windows carrying a joint fade, ascending.
    pub joint_windows: Vec<i64>,
    /// Depths below the thresholds of each joint fade, in window order.
    pub joint_depths: Vec<(f64, f64)>,
    pub marginal_fades_x: usize,
    pub marginal_fades_y: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthTraces {
    pub x: PowerSeries,
    pub y: PowerSeries,
    pub truth: SynthTruth,
}

// Fade shape relative to the deepest sample.
const FADE_PROFILE: [f64; 3] = [0.4, 1.0, 0.6];

fn write_fade(trace: &mut [f64], start: usize, u: f64, depth: f64) {
    for (k, f) in FADE_PROFILE.iter().enumerate() {
        trace[start + k] = u - f * depth;
    }
}

fn depth_from_frechet(x_tilde: f64, p: &GpdParams) -> f64 {
    // exp(-1/x) is the Fréchet CDF; its GPD quantile is the depth.
    let prob = (-1.0 / x_tilde).exp();
    gpd::gpd_quantile_unchecked(prob, p.xi, p.sigma_tilde)
}

/// Two received-power traces whose joint fades have GPD depths with logistic
/// dependence, on top of a bulk that never falls below the thresholds.
///
/// `tail_fraction` of the windows carry one joint fade: three consecutive
/// samples whose deepest point is `u - depth`. A further
/// `layout.marginal_fraction` of windows carry a fade on one receiver only,
/// with depth drawn from the same GPD. Bulk samples are correlated Gaussian
/// in dBm, reflected about the threshold.
pub fn gen_tail_power_traces(
    gpd_x: &GpdParams,
    gpd_y: &GpdParams,
    alpha: f64,
    n_total: usize,
    tail_fraction: f64,
    layout: &TraceLayout,
    seed: u64,
) -> Result<SynthTraces> {
    if !(0.0..0.25).contains(&tail_fraction) {
        return Err(Error::domain(format!(
            "tail fraction must lie in [0, 0.25), got {tail_fraction}"
        )));
    }
    if !(0.0..0.25).contains(&layout.marginal_fraction) {
        return Err(Error::domain(format!(
            "marginal fade fraction must lie in [0, 0.25), got {}",
            layout.marginal_fraction
        )));
    }
    if layout.window_len < 8 {
        return Err(Error::domain(format!(
            "window length must be at least 8 samples, got {}",
            layout.window_len
        )));
    }
    if !(layout.bulk_sd > 0.0 && layout.bulk_rho.abs() < 1.0) {
        return Err(Error::domain("bulk needs positive spread and |rho| < 1"));
    }
    let windows = n_total / layout.window_len;
    if windows == 0 {
        return Err(Error::domain(format!(
            "{n_total} samples do not fill one window of {}",
            layout.window_len
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut xs = vec![0.0; n_total];
    let mut ys = vec![0.0; n_total];
    let c = (1.0 - layout.bulk_rho * layout.bulk_rho).sqrt();
    for i in 0..n_total {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        let dx = layout.bulk_offset + layout.bulk_sd * z1;
        let dy = layout.bulk_offset + layout.bulk_sd * (layout.bulk_rho * z1 + c * z2);
        xs[i] = gpd_x.u + dx.abs();
        ys[i] = gpd_y.u + dy.abs();
    }

    let n_joint = (tail_fraction * windows as f64).round() as usize;
    let n_marg = (layout.marginal_fraction * windows as f64).round() as usize;
    let chosen = index::sample(&mut rng, windows, (n_joint + 2 * n_marg).min(windows)).into_vec();
    let (joint, rest) = chosen.split_at(n_joint.min(chosen.len()));
    let (marg_x, marg_y) = rest.split_at(n_marg.min(rest.len()));
    let mut joint: Vec<usize> = joint.to_vec();
    joint.sort_unstable();

    let frechet = gen_bivariate_logistic_frechet(alpha, joint.len(), rng.random())?;
    let span = layout.window_len - FADE_PROFILE.len() - 2;
    let mut joint_depths = Vec::with_capacity(joint.len());
    for (w, f) in joint.iter().zip(&frechet) {
        let base = w * layout.window_len + 1;
        let lx = depth_from_frechet(f.x_tilde, gpd_x);
        let ly = depth_from_frechet(f.y_tilde, gpd_y);
        write_fade(&mut xs, base + rng.random_range(0..span), gpd_x.u, lx);
        write_fade(&mut ys, base + rng.random_range(0..span), gpd_y.u, ly);
        joint_depths.push((lx, ly));
    }
    for (set, trace, p) in [(marg_x, &mut xs, gpd_x), (marg_y, &mut ys, gpd_y)] {
        for w in set {
            let l = gpd::gpd_quantile_unchecked(rng.random::<f64>(), p.xi, p.sigma_tilde);
            write_fade(trace, w * layout.window_len + 1 + rng.random_range(0..span), p.u, l);
        }
    }

    Ok(SynthTraces {
        x: PowerSeries::from_values(&xs, layout.resolution)?,
        y: PowerSeries::from_values(&ys, layout.resolution)?,
        truth: SynthTruth {
            gpd_x: *gpd_x,
            gpd_y: *gpd_y,
            alpha,
            seed,
            n_total,
            tail_fraction,
            layout: *layout,
            joint_windows: joint.iter().map(|&w| w as i64).collect(),
            joint_depths,
            marginal_fades_x: marg_x.len(),
            marginal_fades_y: marg_y.len(),
        },
    })
}

/// Fraction of pairs with both coordinates at or below each grid node.
pub fn brute_force_joint_cdf(pairs: &[(f64, f64)], xs: &[f64], ys: &[f64]) -> Result<Surface> {
    if pairs.is_empty() {
        return Err(Error::domain("no pairs for the empirical joint CDF"));
    }
    let n = pairs.len() as f64;
    Ok(Surface::from_fn(xs, ys, |gx, gy| {
        pairs.iter().filter(|(a, b)| *a <= gx && *b <= gy).count() as f64 / n
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logistic::{g_logistic, LogisticModel};
    use crate::stats;

    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (k, &i) in idx.iter().enumerate() {
            r[i] = k as f64;
        }
        r
    }

    #[test]
    fn independence_at_alpha_one() {
        let n = 20_000;
        let p = gen_bivariate_logistic_frechet(1.0, n, 3).unwrap();
        let a: Vec<f64> = p.iter().map(|f| f.x_tilde).collect();
        let b: Vec<f64> = p.iter().map(|f| f.y_tilde).collect();
        let rc = stats::pearson_correlation(&ranks(&a), &ranks(&b)).unwrap();
        assert!(rc.abs() < 3.0 / (n as f64).sqrt(), "{rc}");
    }

    #[test]
    fn complete_dependence_near_alpha_zero() {
        let p = gen_bivariate_logistic_frechet(1e-6, 1000, 4).unwrap();
        for f in &p {
            assert!((f.x_tilde / f.y_tilde - 1.0).abs() < 1e-4, "{f:?}");
        }
    }

    #[test]
    fn unit_frechet_margins() {
        for &alpha in &[0.2, 0.5, 0.9] {
            let n = 20_000;
            let p = gen_bivariate_logistic_frechet(alpha, n, 5).unwrap();
            let bound = 1.5 / (n as f64).sqrt();
            let cdf = |x: f64| (-1.0 / x).exp();
            let a: Vec<f64> = p.iter().map(|f| f.x_tilde).collect();
            let b: Vec<f64> = p.iter().map(|f| f.y_tilde).collect();
            assert!(stats::ks_distance(&a, cdf) < bound);
            assert!(stats::ks_distance(&b, cdf) < bound);
        }
    }

    #[test]
    fn joint_cdf_matches_logistic_model() {
        let n = 20_000;
        let grid: Vec<f64> = (1..=20).map(|i| 0.2 * 1.35f64.powi(i)).collect();
        for &alpha in &[0.3, 0.5, 0.7] {
            let p = gen_bivariate_logistic_frechet(alpha, n, 11).unwrap();
            let pairs: Vec<(f64, f64)> = p.iter().map(|f| (f.x_tilde, f.y_tilde)).collect();
            let emp = brute_force_joint_cdf(&pairs, &grid, &grid).unwrap();
            let m = LogisticModel::new(alpha).unwrap();
            let model = Surface::from_fn(&grid, &grid, |x, y| g_logistic(x, y, &m));
            let sup = emp.max_abs_difference(&model).unwrap();
            assert!(sup < 3.0 / (n as f64).sqrt(), "alpha {alpha}: {sup}");
        }
    }

    #[test]
    fn sampler_is_deterministic() {
        let a = gen_bivariate_logistic_frechet(0.6, 500, 9).unwrap();
        let b = gen_bivariate_logistic_frechet(0.6, 500, 9).unwrap();
        assert_eq!(a, b);
        assert!(gen_bivariate_logistic_frechet(0.0, 5, 1).is_err());
    }

    #[test]
    fn brute_force_examples() {
        let s = brute_force_joint_cdf(&[(1.0, 2.0)], &[1.0, 0.5], &[2.0]).unwrap();
        assert_eq!(s.values, vec![1.0, 0.0]);
        assert!(brute_force_joint_cdf(&[], &[1.0], &[1.0]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000;
        let pairs: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
        let g: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let s = brute_force_joint_cdf(&pairs, &g, &g).unwrap();
        let exact = Surface::from_fn(&g, &g, |a, b| a * b);
        assert!(s.max_abs_difference(&exact).unwrap() < 2.0 / (n as f64).sqrt());
    }

    fn traces(tail_fraction: f64, seed: u64) -> SynthTraces {
        let gx = GpdParams::new(-0.2, 5.0, -15.0, 0.01).unwrap();
        let gy = GpdParams::new(-0.3, 8.0, -30.0, 0.01).unwrap();
        gen_tail_power_traces(&gx, &gy, 0.7, 100_000, tail_fraction, &TraceLayout::default(), seed).unwrap()
    }

    #[test]
    fn traces_carry_the_recorded_fades() {
        let t = traces(0.2, 1);
        assert_eq!(t.truth.joint_windows.len(), 200);
        assert_eq!(t.truth.marginal_fades_x, 20);
        let m = t.truth.layout.window_len;
        let xs = t.x.values();
        let ys = t.y.values();
        for (w, (lx, ly)) in t.truth.joint_windows.iter().zip(&t.truth.joint_depths) {
            let r = (*w as usize * m)..((*w as usize + 1) * m);
            let mx = xs[r.clone()].iter().cloned().fold(f64::INFINITY, f64::min);
            let my = ys[r].iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(mx, -15.0 - lx);
            assert_eq!(my, -30.0 - ly);
        }
        let below_x = xs.iter().filter(|&&v| v < -15.0).count();
        assert!(below_x <= 3 * 220);
    }

    #[test]
    fn no_tail_fraction_means_no_fades_below_threshold() {
        let t = traces(0.0, 2);
        assert!(t.truth.joint_windows.is_empty());
        assert!(t.truth.joint_depths.is_empty());
        assert!(gen_tail_power_traces(
            &t.truth.gpd_x,
            &t.truth.gpd_y,
            0.7,
            1000,
            0.3,
            &TraceLayout::default(),
            1
        )
        .is_err());
    }

    #[test]
    fn traces_are_deterministic() {
        let a = traces(0.1, 7);
        let b = traces(0.1, 7);
        assert_eq!(a, b);
        let c = traces(0.1, 8);
        assert_ne!(a.x, c.x);
    }
}
