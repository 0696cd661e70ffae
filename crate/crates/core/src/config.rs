//! Run configuration, read from TOML.
//!
//! Every key has a default, so an empty file is a valid configuration.
//! Dotted keys (`decluster.mg = 3`) and tables (`[decluster]`) are
//! interchangeable.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::TraceLayout;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    /// Linearity bar for the threshold stability curves.
    pub r2_min: f64,
    /// Allowed distance of an angular-measure mean from 1/2.
    pub mean_tol: f64,
    /// Seconds per sample of ingested traces.
    pub resolution: f64,
    pub thresholds: ThresholdConfig,
    pub decluster: DeclusterConfig,
    pub align: AlignConfig,
    pub r0: R0Config,
    pub grids: GridConfig,
    pub frechet: FrechetConfig,
    pub logistic: LogisticConfig,
    pub ugpd: UgpdConfig,
    pub synth: SynthConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 1,
            r2_min: 0.95,
            mean_tol: 0.05,
            resolution: 1e-3,
            thresholds: ThresholdConfig::default(),
            decluster: DeclusterConfig::default(),
            align: AlignConfig::default(),
            r0: R0Config::default(),
            grids: GridConfig::default(),
            frechet: FrechetConfig::default(),
            logistic: LogisticConfig::default(),
            ugpd: UgpdConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    /// Number of candidate thresholds.
    pub grid: usize,
    /// Quantiles of the screening minima bounding the grid.
    pub lo_quantile: f64,
    pub hi_quantile: f64,
    /// Raw-sample quantile used as the screening threshold for candidate minima.
    pub screen_quantile: f64,
    /// Fewest exceedances a candidate threshold must keep.
    pub floor: usize,
    /// Fixed thresholds; selection is skipped for a receiver whose value is set.
    pub u_x: Option<f64>,
    pub u_y: Option<f64>,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            grid: 100,
            lo_quantile: 0.001,
            hi_quantile: 0.25,
            screen_quantile: 0.25,
            floor: crate::threshold::EXCEEDANCE_FLOOR,
            u_x: None,
            u_y: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeclusterConfig {
    /// Run length used for the final cluster minima.
    pub mg: usize,
    /// Run lengths that must all agree on the threshold.
    pub mg_set: Vec<usize>,
}

impl Default for DeclusterConfig {
    fn default() -> Self {
        Self {
            mg: 2,
            mg_set: vec![2, 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignConfig {
    /// Window length in samples.
    #[serde(rename = "M")]
    pub m: usize,
    /// Tail correlation above which joint modeling is warranted.
    pub critical: f64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            m: 1000,
            critical: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct R0Config {
    pub critical: f64,
}

impl Default for R0Config {
    fn default() -> Self {
        Self { critical: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Nodes per axis of the joint-CDF comparison surface.
    pub surface: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { surface: 50 }
    }
}

/// Exceedance probability used in the Fréchet transform of the joint sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaMode {
    /// Condition on exceedance (`zeta = 1`): the joint sample maps to unit Fréchet.
    Conditional,
    /// Fraction of raw samples below the threshold.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrechetConfig {
    pub zeta: ZetaMode,
    pub cap: f64,
}

impl Default for FrechetConfig {
    fn default() -> Self {
        Self {
            zeta: ZetaMode::Conditional,
            cap: crate::transforms::FRECHET_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Likelihood {
    /// Full bivariate density.
    Full,
    /// Negated mixed partial of the exponent measure.
    MixedPartial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticConfig {
    pub likelihood: Likelihood,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            likelihood: Likelihood::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UgpdConfig {
    /// Largest PP-plot distance from the diagonal counted as a good fit.
    pub max_deviation: f64,
}

impl Default for UgpdConfig {
    fn default() -> Self {
        Self { max_deviation: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_total: usize,
    pub tail_fraction: f64,
    pub alpha: f64,
    pub xi_x: f64,
    pub sigma_x: f64,
    pub u_x: f64,
    pub xi_y: f64,
    pub sigma_y: f64,
    pub u_y: f64,
    pub window: usize,
    pub marginal_fraction: f64,
    pub bulk_offset: f64,
    pub bulk_sd: f64,
    pub bulk_rho: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let l = TraceLayout::default();
        Self {
            n_total: 1_000_000,
            tail_fraction: 0.2,
            alpha: 0.7,
            xi_x: -0.2,
            sigma_x: 5.0,
            u_x: -15.0,
            xi_y: -0.2,
            sigma_y: 8.0,
            u_y: -30.0,
            window: l.window_len,
            marginal_fraction: l.marginal_fraction,
            bulk_offset: l.bulk_offset,
            bulk_sd: l.bulk_sd,
            bulk_rho: l.bulk_rho,
        }
    }
}

impl SynthConfig {
    pub fn layout(&self, resolution: f64) -> TraceLayout {
        TraceLayout {
            window_len: self.window,
            marginal_fraction: self.marginal_fraction,
            bulk_offset: self.bulk_offset,
            bulk_sd: self.bulk_sd,
            bulk_rho: self.bulk_rho,
            resolution,
        }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

fn in_unit(v: f64) -> bool {
    v > 0.0 && v < 1.0
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        check(self.r2_min < 1.0, || format!("r2_min must be below 1, got {}", self.r2_min))?;
        check(self.mean_tol > 0.0 && self.mean_tol < 0.5, || {
            format!("mean_tol must lie in (0, 0.5), got {}", self.mean_tol)
        })?;
        check(self.resolution > 0.0, || format!("resolution must be positive, got {}", self.resolution))?;
        let t = &self.thresholds;
        check(t.grid >= 1, || "thresholds.grid must be at least 1".into())?;
        check(
            0.0 <= t.lo_quantile && t.lo_quantile < t.hi_quantile && t.hi_quantile <= 1.0,
            || format!("threshold quantiles must satisfy 0 <= lo < hi <= 1, got {} and {}", t.lo_quantile, t.hi_quantile),
        )?;
        check(in_unit(t.screen_quantile), || {
            format!("thresholds.screen_quantile must lie in (0, 1), got {}", t.screen_quantile)
        })?;
        check(t.floor >= 2, || "thresholds.floor must be at least 2".into())?;
        for (k, u) in [("u_x", t.u_x), ("u_y", t.u_y)] {
            check(u.is_none_or(f64::is_finite), || format!("thresholds.{k} must be finite"))?;
        }
        check(self.decluster.mg >= 1, || "decluster.mg must be at least 1".into())?;
        check(
            !self.decluster.mg_set.is_empty() && self.decluster.mg_set.iter().all(|&m| m >= 1),
            || "decluster.mg_set must be a nonempty list of run lengths >= 1".into(),
        )?;
        check(self.align.m >= 1, || "align.M must be at least 1".into())?;
        check(self.align.critical >= 0.0, || "align.critical must be nonnegative".into())?;
        check(in_unit(self.r0.critical), || format!("r0.critical must lie in (0, 1), got {}", self.r0.critical))?;
        check(self.grids.surface >= 2, || "grids.surface must be at least 2".into())?;
        check(self.frechet.cap > 1.0, || "frechet.cap must exceed 1".into())?;
        check(self.ugpd.max_deviation > 0.0, || "ugpd.max_deviation must be positive".into())?;
        let s = &self.synth;
        check(s.alpha > 0.0 && s.alpha <= 1.0, || format!("synth.alpha must lie in (0, 1], got {}", s.alpha))?;
        check((0.0..0.25).contains(&s.tail_fraction), || {
            format!("synth.tail_fraction must lie in [0, 0.25), got {}", s.tail_fraction)
        })?;
        check(s.sigma_x > 0.0 && s.sigma_y > 0.0, || "synth scales must be positive".into())?;
        check(s.xi_x > -1.0 && s.xi_y > -1.0, || "synth shapes must exceed -1".into())?;
        check(s.window >= 8, || "synth.window must be at least 8".into())?;
        check(s.n_total >= s.window, || "synth.n_total must cover one window".into())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = Config::from_toml_str("").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.decluster.mg, 2);
        assert_eq!(c.align.m, 1000);
        assert_eq!(c.r2_min, 0.95);
        assert_eq!(c.r0.critical, 0.05);
    }

    #[test]
    fn dotted_keys_and_tables() {
        let c = Config::from_toml_str("seed = 9\ndecluster.mg = 3\nalign.M = 100\n[thresholds]\nu_x = -15.0\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.decluster.mg, 3);
        assert_eq!(c.align.m, 100);
        assert_eq!(c.thresholds.u_x, Some(-15.0));
        let c = Config::from_toml_str("frechet.zeta = \"raw\"\nlogistic.likelihood = \"mixed_partial\"").unwrap();
        assert_eq!(c.frechet.zeta, ZetaMode::Raw);
        assert_eq!(c.logistic.likelihood, Likelihood::MixedPartial);
    }

    #[test]
    fn invalid_values_are_rejected() {
        for bad in [
            "align.M = 0",
            "decluster.mg = 0",
            "r0.critical = 1.5",
            "mean_tol = 0",
            "grids.surface = 1",
            "unknown_key = 1",
            "synth.tail_fraction = 0.3",
            "thresholds.lo_quantile = 0.5\nthresholds.hi_quantile = 0.2",
        ] {
            assert!(matches!(Config::from_toml_str(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn toml_round_trip() {
        let mut c = Config::default();
        c.thresholds.u_y = Some(-30.5);
        c.seed = 42;
        let back = Config::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
