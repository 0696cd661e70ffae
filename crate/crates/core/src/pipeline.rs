//! End-to-end analysis of a pair of received-power traces.
//!
//! Stages run in a fixed order; a caller names the stages it wants and
//! their prerequisites are pulled in. A failing stage stops the run and the
//! report keeps everything computed before it.

use serde::{Deserialize, Serialize};

use crate::baseline::{self, BivariateGaussian};
use crate::config::{Config, Likelihood, ZetaMode};
use crate::decluster::{cluster_minima, decluster};
use crate::error::{Error, Result};
use crate::gpd::GpdParams;
use crate::io::PlotTable;
use crate::joint::{self, JointTailSample};
use crate::logistic::{self, LogisticModel};
use crate::poisson::{self, AngularMeasure};
use crate::report::*;
use crate::series::PowerSeries;
use crate::stats;
use crate::synth::{self, SynthTruth};
use crate::threshold::{self, ThresholdSelection};
use crate::transforms::{self, FrechetPair, PickandsPoint, RadialCoordinate};
use crate::ugpd;
use crate::validation::{self, AngularDensity, Surface};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Decluster,
    Threshold,
    Ugpd,
    Align,
    Frechet,
    R0,
    Logistic,
    Poisson,
    Validation,
    Baseline,
    Comparison,
}

impl Stage {
    pub const ALL: [Stage; 11] = [
        Stage::Decluster,
        Stage::Threshold,
        Stage::Ugpd,
        Stage::Align,
        Stage::Frechet,
        Stage::R0,
        Stage::Logistic,
        Stage::Poisson,
        Stage::Validation,
        Stage::Baseline,
        Stage::Comparison,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Decluster => "decluster",
            Stage::Threshold => "threshold",
            Stage::Ugpd => "fit-ugpd",
            Stage::Align => "align",
            Stage::Frechet => "frechet",
            Stage::R0 => "r0",
            Stage::Logistic => "fit-bgpd-logistic",
            Stage::Poisson => "fit-bgpd-ppp",
            Stage::Validation => "validate",
            Stage::Baseline => "baseline",
            Stage::Comparison => "compare",
        }
    }

    fn prerequisites(self) -> &'static [Stage] {
        match self {
            Stage::Decluster | Stage::Baseline => &[],
            Stage::Threshold => &[Stage::Decluster],
            Stage::Ugpd => &[Stage::Threshold],
            Stage::Align => &[Stage::Ugpd],
            Stage::Frechet => &[Stage::Align],
            Stage::R0 | Stage::Logistic => &[Stage::Frechet],
            Stage::Poisson => &[Stage::R0],
            Stage::Validation => &[Stage::Logistic, Stage::Poisson],
            Stage::Comparison => &[Stage::Logistic, Stage::Poisson, Stage::Baseline],
        }
    }
}

/// `targets` and everything they depend on, in execution order.
pub fn plan(targets: &[Stage]) -> Vec<Stage> {
    let mut need = std::collections::BTreeSet::new();
    let mut stack: Vec<Stage> = targets.to_vec();
    while let Some(s) = stack.pop() {
        if need.insert(s) {
            stack.extend_from_slice(s.prerequisites());
        }
    }
    need.into_iter().collect()
}

/// Intermediate results kept for plotting and for later stages.
#[derive(Debug, Default)]
struct State {
    minima_by_mg: Vec<[(usize, Vec<f64>); 2]>,
    selections: [Option<ThresholdSelection>; 2],
    u: [f64; 2],
    minima: [Vec<(i64, f64)>; 2],
    depths: [Vec<f64>; 2],
    params: [Option<GpdParams>; 2],
    joint: Option<JointTailSample>,
    frechet_params: [Option<GpdParams>; 2],
    frechet: Vec<FrechetPair>,
    points: Vec<PickandsPoint>,
    r0: Option<f64>,
    logistic: Option<LogisticModel>,
    h_raw: Option<AngularMeasure>,
    h_sym: Option<AngularMeasure>,
    h_l: Option<AngularDensity>,
    gaussian: Option<BivariateGaussian>,
    surfaces: Option<[Surface; 4]>,
}

#[derive(Debug)]
pub struct PipelineRun {
    pub report: Report,
    pub plots: Vec<PlotTable>,
}

#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct PipelineFailure {
    pub error: Error,
    /// Report and plots of the stages that completed.
    pub partial: Box<PipelineRun>,
}

impl PipelineFailure {
    pub fn stage(&self) -> &'static str {
        self.error.stage().unwrap_or("pipeline")
    }
}

struct Runner<'a> {
    cfg: &'a Config,
    series: [&'a PowerSeries; 2],
    report: Report,
    st: State,
}

/// Runs `targets` and their prerequisites on the paired traces.
pub fn run_pipeline(
    cfg: &Config,
    x: &PowerSeries,
    y: &PowerSeries,
    targets: &[Stage],
    source: &str,
    truth: Option<SynthTruth>,
) -> std::result::Result<PipelineRun, PipelineFailure> {
    let input = InputSummary {
        samples: x.len(),
        resolution: x.resolution(),
        source: source.to_string(),
    };
    let mut r = Runner {
        cfg,
        series: [x, y],
        report: Report::new(cfg.clone(), input, truth),
        st: State::default(),
    };
    let mut failure = None;
    if let Err(e) = cfg.validate() {
        failure = Some(e.at_stage("config"));
    } else if x.len() != y.len() || x.samples().iter().zip(y.samples()).any(|(a, b)| a.t != b.t) {
        failure = Some(Error::domain("the two traces do not share time steps").at_stage("ingest"));
    } else {
        for stage in plan(targets) {
            if let Err(e) = r.run(stage) {
                failure = Some(e.at_stage(stage.name()));
                break;
            }
            r.report.stages_completed.push(stage.name().to_string());
        }
    }
    if let Some(e) = &failure {
        r.report.failure = Some(StageFailure {
            stage: e.stage().unwrap_or("pipeline").to_string(),
            message: match e {
                Error::Stage { source, .. } => source.to_string(),
                other => other.to_string(),
            },
        });
    }
    let plots = r.plots();
    let run = PipelineRun {
        report: r.report,
        plots,
    };
    match failure {
        None => Ok(run),
        Some(error) => Err(PipelineFailure {
            error,
            partial: Box::new(run),
        }),
    }
}

fn per<T>(f: impl Fn(usize) -> T) -> PerReceiver<T> {
    PerReceiver { rx1: f(0), rx2: f(1) }
}

fn try_per<T>(mut f: impl FnMut(usize) -> Result<T>) -> Result<PerReceiver<T>> {
    Ok(PerReceiver { rx1: f(0)?, rx2: f(1)? })
}

fn mg_runs(cfg: &Config) -> Vec<usize> {
    let mut v = cfg.decluster.mg_set.clone();
    v.push(cfg.decluster.mg);
    v.sort_unstable();
    v.dedup();
    v
}

/// Fréchet value of a depth below the threshold; depth 0 maps to the
/// transform's value at the threshold itself.
fn frechet_of_depth(l: f64, p: &GpdParams, cap: f64) -> f64 {
    if l <= 0.0 {
        return -1.0 / (-p.zeta).ln_1p();
    }
    transforms::frechet_transform_capped(p.u - l, p, cap).map_or(cap, |(v, _)| v)
}

/// `P(X~ >= a, Y~ >= b)` from the joint CDF `g` with unit Fréchet margins.
fn joint_survival(a: f64, b: f64, g: &impl Fn(f64, f64) -> f64) -> f64 {
    let f = |v: f64| if v > 0.0 { (-1.0 / v).exp() } else { 0.0 };
    let joint = if a > 0.0 && b > 0.0 { g(a, b) } else { 0.0 };
    (1.0 - f(a) - f(b) + joint).clamp(0.0, 1.0)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

impl Runner<'_> {
    fn run(&mut self, stage: Stage) -> Result<()> {
        match stage {
            Stage::Decluster => self.decluster(),
            Stage::Threshold => self.threshold(),
            Stage::Ugpd => self.ugpd(),
            Stage::Align => self.align(),
            Stage::Frechet => self.frechet(),
            Stage::R0 => self.r0(),
            Stage::Logistic => self.logistic(),
            Stage::Poisson => self.poisson(),
            Stage::Validation => self.validation(),
            Stage::Baseline => self.baseline(),
            Stage::Comparison => self.comparison(),
        }
    }

    fn decluster(&mut self) -> Result<()> {
        let runs = mg_runs(self.cfg);
        let mut summaries = Vec::new();
        let mut by_mg: Vec<[(usize, Vec<f64>); 2]> = Vec::new();
        let mut screens = [0.0; 2];
        for (k, s) in self.series.iter().enumerate() {
            let sorted = stats::sorted(&s.values());
            screens[k] = stats::quantile_sorted(&sorted, self.cfg.thresholds.screen_quantile);
        }
        for &mg in &runs {
            let m: [(usize, Vec<f64>); 2] = std::array::from_fn(|k| {
                let c = decluster(self.series[k], screens[k], mg);
                (mg, c.iter().map(|c| c.minimum).collect())
            });
            by_mg.push(m);
        }
        for k in 0..2 {
            summaries.push(DeclusterSummary {
                screen_threshold: screens[k],
                runs: by_mg
                    .iter()
                    .map(|m| ClusterCount {
                        mg: m[k].0,
                        clusters: m[k].1.len(),
                    })
                    .collect(),
            });
        }
        let rx2 = summaries.pop().expect("two receivers");
        let rx1 = summaries.pop().expect("two receivers");
        self.report.decluster = Some(PerReceiver { rx1, rx2 });
        self.st.minima_by_mg = by_mg;
        Ok(())
    }

    fn threshold(&mut self) -> Result<()> {
        let t = &self.cfg.thresholds;
        let fixed = [t.u_x, t.u_y];
        let mut choices: Vec<ThresholdChoice> = Vec::new();
        let mut err = None;
        for k in 0..2 {
            if let Some(u) = fixed[k] {
                self.st.u[k] = u;
                choices.push(ThresholdChoice {
                    u: Some(u),
                    selected: false,
                    selection: None,
                });
                continue;
            }
            let minima_by_mg: Vec<(usize, Vec<f64>)> = self
                .st
                .minima_by_mg
                .iter()
                .filter(|m| self.cfg.decluster.mg_set.contains(&m[k].0))
                .map(|m| m[k].clone())
                .collect();
            let grid_source = &self
                .st
                .minima_by_mg
                .iter()
                .find(|m| m[k].0 == self.cfg.decluster.mg)
                .expect("configured run length is declustered")[k]
                .1;
            let grid = threshold::default_grid(grid_source, t.lo_quantile, t.hi_quantile, t.grid)?;
            let sel = threshold::select_threshold(&minima_by_mg, &grid, self.cfg.r2_min, t.floor)?;
            if let Some(u) = sel.u_opt {
                self.st.u[k] = u;
            } else if err.is_none() {
                err = Some(Error::NoOptimumThreshold { r2_min: sel.r2_min });
            }
            choices.push(ThresholdChoice {
                u: sel.u_opt,
                selected: true,
                selection: Some(sel.clone()),
            });
            self.st.selections[k] = Some(sel);
        }
        let rx2 = choices.pop().expect("two receivers");
        let rx1 = choices.pop().expect("two receivers");
        self.report.threshold = Some(PerReceiver { rx1, rx2 });
        err.map_or(Ok(()), Err)
    }

    fn ugpd(&mut self) -> Result<()> {
        let mg = self.cfg.decluster.mg;
        let fits = try_per(|k| {
            let u = self.st.u[k];
            let clusters = decluster(self.series[k], u, mg);
            let minima = cluster_minima(&clusters);
            let depths: Vec<f64> = minima.iter().map(|&(_, v)| u - v).collect();
            let zeta_hat = self.series[k].fraction_below(u);
            let fit = ugpd::fit_gpd_mle(&depths)?;
            let params = GpdParams::new(fit.params.xi, fit.params.sigma_tilde, u, zeta_hat)?;
            let (pp_max, pp_rmse) = ugpd::diagonal_deviation(&ugpd::pp_points(&depths, &params));
            let (qq_max, qq_rmse) = ugpd::diagonal_deviation(&ugpd::qq_points(&depths, &params));
            let mrl_r2 = self.st.selections[k].as_ref().and_then(|s| {
                s.per_mg.iter().find(|d| d.mg == mg).and_then(|d| d.mrl_r2)
            });
            let out = MarginFit {
                u,
                mg,
                clusters: clusters.len(),
                zeta_hat,
                fit,
                params,
                pp_max_deviation: pp_max,
                pp_rmse,
                qq_max_deviation: qq_max,
                qq_rmse,
                beyond_endpoint: ugpd::beyond_endpoint_count(&depths, &params),
                pp_pass: pp_max <= self.cfg.ugpd.max_deviation,
                mrl_r2,
            };
            self.st.minima[k] = minima;
            self.st.depths[k] = depths;
            self.st.params[k] = Some(params);
            Ok(out)
        })?;
        self.report.ugpd = Some(fits);
        Ok(())
    }

    fn align(&mut self) -> Result<()> {
        let m = self.cfg.align.m;
        let sample = joint::align_joint_exceedances(&self.st.minima[0], &self.st.minima[1], self.st.u[0], self.st.u[1], m)?;
        let rho_total = stats::pearson_correlation(&self.series[0].values(), &self.series[1].values())?;
        let (xs, ys) = (sample.xs(), sample.ys());
        let rho_tail = if sample.len() >= 2 {
            stats::pearson_correlation(&xs, &ys).ok()
        } else {
            None
        };
        let mut summary = JointSummary {
            window_len: m,
            windows: self.series[0].len().div_ceil(m),
            pairs: sample.len(),
            rho_total,
            diversity: joint::spatial_diversity_feasible(rho_total),
            rho_tail,
            tail_dependence_needed: rho_tail.map(|r| joint::tail_dependence_needed(r, self.cfg.align.critical)),
            refit: None,
        };
        let refit = (|| {
            if sample.len() < ugpd::MIN_EXCESSES {
                return Err(Error::TooFewSamples {
                    what: "joint tail pairs",
                    needed: ugpd::MIN_EXCESSES,
                    got: sample.len(),
                });
            }
            let lx: Vec<f64> = xs.iter().map(|v| sample.u_x - v).collect();
            let ly: Vec<f64> = ys.iter().map(|v| sample.u_y - v).collect();
            Ok(PerReceiver {
                rx1: ugpd::fit_gpd_mle(&lx)?,
                rx2: ugpd::fit_gpd_mle(&ly)?,
            })
        })();
        let outcome = refit.map(|r| summary.refit = Some(r));
        self.report.joint = Some(summary);
        self.st.joint = Some(sample);
        outcome
    }

    fn frechet(&mut self) -> Result<()> {
        let joint = self.st.joint.as_ref().expect("align ran");
        let refit = self.report.joint.as_ref().and_then(|j| j.refit.clone()).expect("align ran");
        let fits = [refit.rx1, refit.rx2];
        let params: [GpdParams; 2] = [0, 1].map(|k| {
            let zeta = match self.cfg.frechet.zeta {
                ZetaMode::Conditional => 1.0,
                ZetaMode::Raw => self.st.params[k].expect("margins fitted").zeta,
            };
            GpdParams::new(fits[k].params.xi, fits[k].params.sigma_tilde, self.st.u[k], zeta)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .try_into()
        .expect("two receivers");
        let mut capped = 0;
        let mut pairs = Vec::with_capacity(joint.len());
        for p in &joint.pairs {
            let (a, ca) = transforms::frechet_transform_capped(p.x, &params[0], self.cfg.frechet.cap)?;
            let (b, cb) = transforms::frechet_transform_capped(p.y, &params[1], self.cfg.frechet.cap)?;
            capped += ca as usize + cb as usize;
            pairs.push(FrechetPair::new(a, b, p.window)?);
        }
        if capped > 0 {
            self.report
                .warnings
                .push(format!("{capped} Fréchet values beyond the fitted support endpoint were capped at {}", self.cfg.frechet.cap));
        }
        let xs: Vec<f64> = pairs.iter().map(|p| p.x_tilde).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.y_tilde).collect();
        self.report.frechet = Some(FrechetSummary {
            zeta_mode: self.cfg.frechet.zeta,
            params: per(|k| params[k]),
            ks: PerReceiver {
                rx1: transforms::frechet_margin_ks(&xs),
                rx2: transforms::frechet_margin_ks(&ys),
            },
            capped,
        });
        self.st.points = pairs.iter().map(transforms::extremal_pickands_transform).collect();
        self.st.frechet = pairs;
        self.st.frechet_params = [Some(params[0]), Some(params[1])];
        Ok(())
    }

    fn r0(&mut self) -> Result<()> {
        let critical = self.cfg.r0.critical;
        let (sel, relaxed) = match validation::select_r0(&self.st.points, critical) {
            Ok(sel) => ((sel.r0, sel.retained, sel.statistic, sel.profile), false),
            Err(Error::NoRadialCutoff { critical, candidates, profile }) => {
                match validation::r0_within_noise(&profile, critical) {
                    Some(c) => {
                        self.report.warnings.push(format!(
                            "no radial cut-off has |corr| < {critical}; using r0 = {} where the correlation {:.3} is within sampling noise of {} retained points",
                            c.r0,
                            c.statistic(),
                            c.retained
                        ));
                        ((c.r0, c.retained, c.statistic(), profile), true)
                    }
                    None => {
                        self.report.r0 = Some(R0Summary {
                            r0: f64::NAN,
                            retained: 0,
                            statistic: profile.iter().map(|c| c.statistic()).fold(f64::INFINITY, f64::min),
                            critical,
                            relaxed: true,
                            profile: profile.clone(),
                        });
                        return Err(Error::NoRadialCutoff { critical, candidates, profile });
                    }
                }
            }
            Err(e) => return Err(e),
        };
        let (r0, retained, statistic, profile) = sel;
        self.st.r0 = Some(r0);
        self.report.r0 = Some(R0Summary {
            r0,
            retained,
            statistic,
            critical,
            relaxed,
            profile,
        });
        Ok(())
    }

    fn retained_pairs(&self) -> Option<Vec<FrechetPair>> {
        let r0 = self.st.r0?;
        Some(
            self.st
                .frechet
                .iter()
                .zip(&self.st.points)
                .filter(|(_, p)| p.r > r0)
                .map(|(f, _)| *f)
                .collect(),
        )
    }

    fn logistic(&mut self) -> Result<()> {
        let pairs = &self.st.frechet;
        let lx: Vec<f64> = pairs.iter().map(|p| p.x_tilde.ln()).collect();
        let ly: Vec<f64> = pairs.iter().map(|p| p.y_tilde.ln()).collect();
        let rho = stats::pearson_correlation(&lx, &ly)?;
        let mle = logistic::fit_alpha_mle(pairs)?;
        let mixed = logistic::fit_alpha_mle_mixed_partial(pairs)?;
        let retained = match self.retained_pairs() {
            Some(r) => Some(logistic::fit_alpha_mle_mixed_partial(&r)?),
            None => None,
        };
        let selected = match self.cfg.logistic.likelihood {
            Likelihood::Full => mle,
            Likelihood::MixedPartial => retained.unwrap_or(mixed),
        };
        self.report.logistic = Some(LogisticSummary {
            rho_frechet_log: rho,
            from_rho: logistic::alpha_from_rho(rho).map_err(|e| e.to_string()),
            mle,
            mle_mixed_partial: mixed,
            mle_mixed_partial_retained: retained,
            selected,
        });
        self.st.logistic = Some(selected);
        Ok(())
    }

    fn poisson(&mut self) -> Result<()> {
        let r0 = self.st.r0.expect("r0 ran");
        let raw = poisson::estimate_angular_measure(&self.st.points, r0, false)?;
        let sym = poisson::estimate_angular_measure(&self.st.points, r0, true)?;
        self.report.poisson = Some(PoissonSummary {
            r0,
            atoms: raw.atoms.len(),
            raw_mean: raw.mean(),
            symmetrized_mean: sym.mean(),
        });
        self.st.h_raw = Some(raw);
        self.st.h_sym = Some(sym);
        Ok(())
    }

    fn validation(&mut self) -> Result<()> {
        let r0 = self.st.r0.expect("r0 ran");
        let model = self.st.logistic.expect("logistic ran");
        let uniformity = validation::radial_uniformity(&self.st.points, r0)?;
        let retained: Vec<PickandsPoint> = self.st.points.iter().filter(|p| p.r > r0).copied().collect();
        let h_l = validation::h_l_density(&retained, &model, RadialCoordinate::Reciprocal)?;
        let raw_mean = self.st.h_raw.as_ref().expect("poisson ran").mean();
        let tol = self.cfg.mean_tol;
        self.report.validation = Some(ValidationSummary {
            uniformity,
            h_l_mean: h_l.mean,
            h_l_mu: h_l.mu,
            h_l_r_dependence_cv: h_l.r_dependence_cv,
            h_l_mean_check: validation::mean_constraint_check(h_l.mean, tol),
            h_pp_raw_mean_check: validation::mean_constraint_check(raw_mean, tol),
            h_pp_symmetrized_mean: self.st.h_sym.as_ref().expect("poisson ran").mean(),
        });
        self.st.h_l = Some(h_l);
        Ok(())
    }

    fn baseline(&mut self) -> Result<()> {
        let xs = self.series[0].values();
        let ys = self.series[1].values();
        let margins = PerReceiver {
            rx1: baseline::fit_margin_candidates(&xs)?,
            rx2: baseline::fit_margin_candidates(&ys)?,
        };
        let g = baseline::fit_bivariate_gaussian(&xs, &ys)?;
        self.report.baseline = Some(BaselineSummary { margins, gaussian: g });
        self.st.gaussian = Some(g);
        Ok(())
    }

    fn comparison(&mut self) -> Result<()> {
        let joint = self.st.joint.as_ref().expect("align ran");
        let n = self.cfg.grids.surface;
        let deepest_x = joint.xs().into_iter().fold(f64::INFINITY, f64::min);
        let deepest_y = joint.ys().into_iter().fold(f64::INFINITY, f64::min);
        let gx = linspace(deepest_x, joint.u_x, n);
        let gy = linspace(deepest_y, joint.u_y, n);
        let pairs: Vec<(f64, f64)> = joint.pairs.iter().map(|p| (p.x, p.y)).collect();
        let empirical = synth::brute_force_joint_cdf(&pairs, &gx, &gy)?;

        let px = self.st.frechet_params[0].expect("frechet ran");
        let py = self.st.frechet_params[1].expect("frechet ran");
        let cap = self.cfg.frechet.cap;
        let conditional = |g: &dyn Fn(f64, f64) -> f64| {
            let g = |a: f64, b: f64| g(a, b);
            let norm = joint_survival(frechet_of_depth(0.0, &px, cap), frechet_of_depth(0.0, &py, cap), &g);
            Surface::from_fn(&gx, &gy, |x, y| {
                let a = frechet_of_depth(px.u - x, &px, cap);
                let b = frechet_of_depth(py.u - y, &py, cap);
                joint_survival(a, b, &g) / norm
            })
        };
        let m = self.st.logistic.expect("logistic ran");
        let logistic_surface = conditional(&|a, b| logistic::g_logistic(a, b, &m));
        let h = self.st.h_sym.as_ref().expect("poisson ran");
        let poisson_surface = conditional(&|a, b| poisson::g_poisson(a, b, h));

        let g = self.st.gaussian.expect("baseline ran");
        let at_u = baseline::extrapolated_joint_cdf(&g, joint.u_x, joint.u_y);
        if !(at_u > 0.0) {
            return Err(Error::Degenerate("Gaussian baseline puts no mass below both thresholds".into()));
        }
        let gaussian_surface = Surface::from_fn(&gx, &gy, |x, y| baseline::extrapolated_joint_cdf(&g, x, y) / at_u);

        self.report.comparison = Some(ComparisonSummary {
            nodes_per_axis: n,
            x_range: (deepest_x, joint.u_x),
            y_range: (deepest_y, joint.u_y),
            rmse_logistic: validation::rmse_joint_cdf(&logistic_surface, &empirical)?,
            rmse_poisson: validation::rmse_joint_cdf(&poisson_surface, &empirical)?,
            rmse_gaussian: validation::rmse_joint_cdf(&gaussian_surface, &empirical)?,
            sup_logistic_vs_poisson: logistic_surface.max_abs_difference(&poisson_surface)?,
        });
        self.st.surfaces = Some([empirical, logistic_surface, poisson_surface, gaussian_surface]);
        Ok(())
    }

    fn plots(&self) -> Vec<PlotTable> {
        let mut out = Vec::new();
        let tags = ["rx1", "rx2"];
        for k in 0..2 {
            if let Some(sel) = &self.st.selections[k] {
                let mut mrl = PlotTable::new(&format!("mrl_{}", tags[k]), &["mg", "u", "mean_excess", "count"]);
                let mut stab = PlotTable::new(
                    &format!("stability_{}", tags[k]),
                    &["mg", "u", "xi_hat", "xi_se", "sigma_star", "sigma_star_se", "n_exc"],
                );
                for d in &sel.per_mg {
                    for p in &d.mrl {
                        mrl.push(vec![d.mg as f64, p.u, p.mean_excess, p.count as f64]);
                    }
                    for p in d.stability.iter().filter(|p| p.is_fitted()) {
                        stab.push(vec![d.mg as f64, p.u, p.xi_hat, p.xi_se, p.sigma_star, p.sigma_star_se, p.n_exc as f64]);
                    }
                }
                out.push(mrl);
                out.push(stab);
            }
            if let Some(p) = &self.st.params[k] {
                let mut pp = PlotTable::new(&format!("pp_{}", tags[k]), &["empirical", "model"]);
                for (a, b) in ugpd::pp_points(&self.st.depths[k], p) {
                    pp.push(vec![a, b]);
                }
                let mut qq = PlotTable::new(&format!("qq_{}", tags[k]), &["model", "empirical"]);
                for (a, b) in ugpd::qq_points(&self.st.depths[k], p) {
                    qq.push(vec![a, b]);
                }
                out.push(pp);
                out.push(qq);
            }
        }
        if !self.st.frechet.is_empty() {
            for k in 0..2 {
                let mut v: Vec<f64> = self
                    .st
                    .frechet
                    .iter()
                    .map(|p| if k == 0 { p.x_tilde } else { p.y_tilde })
                    .collect();
                v.sort_by(f64::total_cmp);
                let n = v.len() as f64;
                let mut t = PlotTable::new(&format!("frechet_cdf_{}", tags[k]), &["x_tilde", "empirical", "unit_frechet"]);
                for (i, x) in v.iter().enumerate() {
                    t.push(vec![*x, (i + 1) as f64 / n, (-1.0 / x).exp()]);
                }
                out.push(t);
            }
            let r0 = self.st.r0.unwrap_or(f64::NEG_INFINITY);
            let mut t = PlotTable::new("r_omega", &["r", "omega", "retained"]);
            for p in &self.st.points {
                t.push(vec![p.r, p.omega, (p.r > r0) as u8 as f64]);
            }
            out.push(t);
        }
        if let Some(r0s) = &self.report.r0 {
            let mut t = PlotTable::new("r0_profile", &["r0", "retained", "corr", "corr_folded"]);
            for c in &r0s.profile {
                t.push(vec![c.r0, c.retained as f64, c.corr, c.corr_folded]);
            }
            out.push(t);
        }
        if let (Some(r0), true) = (self.st.r0, self.report.validation.is_some()) {
            let mut u: Vec<f64> = self.st.points.iter().filter(|p| p.r > r0).map(|p| p.r / r0).collect();
            u.sort_by(f64::total_cmp);
            let n = u.len() as f64;
            let mut t = PlotTable::new("uniformity", &["r_over_r0", "empirical", "uniform"]);
            for (i, v) in u.iter().enumerate() {
                t.push(vec![*v, (i + 1) as f64 / n, *v]);
            }
            out.push(t);
        }
        if let (Some(hl), Some(h)) = (&self.st.h_l, &self.st.h_raw) {
            let mut t = PlotTable::new("angular_density", &["omega", "h_l", "h_pp_smoothed"]);
            for (i, (&w, &d)) in hl.omega.iter().zip(&hl.density).enumerate() {
                if i % 10 == 0 {
                    t.push(vec![w, d, poisson::smoothed_angular_density(w, h, poisson::SMOOTHING_BANDWIDTH)]);
                }
            }
            out.push(t);
        }
        if let Some([e, l, p, g]) = &self.st.surfaces {
            let mut t = PlotTable::new("cdf_surface", &["x_dbm", "y_dbm", "empirical", "logistic", "poisson", "gaussian"]);
            for (i, &x) in e.xs.iter().enumerate() {
                for (j, &y) in e.ys.iter().enumerate() {
                    t.push(vec![x, y, e.at(i, j), l.at(i, j), p.at(i, j), g.at(i, j)]);
                }
            }
            out.push(t);
        }
        out
    }
}

/// Synthetic traces from the `synth` section of the configuration.
pub fn synth_from_config(cfg: &Config) -> Result<synth::SynthTraces> {
    let s = &cfg.synth;
    let gx = GpdParams::new(s.xi_x, s.sigma_x, s.u_x, 1.0)?;
    let gy = GpdParams::new(s.xi_y, s.sigma_y, s.u_y, 1.0)?;
    synth::gen_tail_power_traces(&gx, &gy, s.alpha, s.n_total, s.tail_fraction, &s.layout(cfg.resolution), cfg.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_pulls_in_prerequisites_in_order() {
        assert_eq!(plan(&[Stage::Ugpd]), vec![Stage::Decluster, Stage::Threshold, Stage::Ugpd]);
        assert_eq!(plan(&[Stage::Baseline]), vec![Stage::Baseline]);
        let all = plan(&[Stage::Comparison, Stage::Validation]);
        assert_eq!(all, Stage::ALL.to_vec());
        let l = plan(&[Stage::Logistic]);
        assert!(!l.contains(&Stage::R0));
    }

    #[test]
    fn joint_survival_limits() {
        let g = |a: f64, b: f64| (-(1.0 / a + 1.0 / b)).exp();
        assert_eq!(joint_survival(0.0, 0.0, &g), 1.0);
        let s = joint_survival(2.0, 3.0, &g);
        let fa = (-0.5f64).exp();
        let fb = (-1.0f64 / 3.0).exp();
        assert!((s - (1.0 - fa) * (1.0 - fb)).abs() < 1e-15);
    }

    #[test]
    fn invalid_config_fails_at_config_stage() {
        let mut cfg = Config::default();
        cfg.align.m = 0;
        let x = PowerSeries::from_values(&[0.0, 1.0, 2.0], 1.0).unwrap();
        let err = run_pipeline(&cfg, &x, &x, &[Stage::Baseline], "test", None).unwrap_err();
        assert_eq!(err.stage(), "config");
        assert_eq!(err.partial.report.failure.as_ref().unwrap().stage, "config");
    }
}
