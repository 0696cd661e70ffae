//! Versioned run report.

use serde::{Deserialize, Serialize};

use crate::baseline::{BivariateGaussian, MarginRanking};
use crate::config::{Config, ZetaMode};
use crate::gpd::GpdParams;
use crate::joint::DiversityDecision;
use crate::logistic::LogisticModel;
use crate::synth::SynthTruth;
use crate::threshold::ThresholdSelection;
use crate::ugpd::GpdFit;
use crate::validation::{MeanConstraint, R0Candidate, UniformityCheck};

/// Bumped whenever a field is renamed, removed or changes meaning.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One value per receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerReceiver<T> {
    pub rx1: T,
    pub rx2: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub config: Config,
    pub input: InputSummary,
    /// Present when the traces came from the synthetic generator.
    pub truth: Option<SynthTruth>,
    pub stages_completed: Vec<String>,
    pub failure: Option<StageFailure>,
    pub warnings: Vec<String>,
    pub decluster: Option<PerReceiver<DeclusterSummary>>,
    pub threshold: Option<PerReceiver<ThresholdChoice>>,
    pub ugpd: Option<PerReceiver<MarginFit>>,
    pub joint: Option<JointSummary>,
    pub frechet: Option<FrechetSummary>,
    pub r0: Option<R0Summary>,
    pub logistic: Option<LogisticSummary>,
    pub poisson: Option<PoissonSummary>,
    pub validation: Option<ValidationSummary>,
    pub baseline: Option<BaselineSummary>,
    pub comparison: Option<ComparisonSummary>,
}

impl Report {
    pub fn new(config: Config, input: InputSummary, truth: Option<SynthTruth>) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            config,
            input,
            truth,
            stages_completed: Vec::new(),
            failure: None,
            warnings: Vec::new(),
            decluster: None,
            threshold: None,
            ugpd: None,
            joint: None,
            frechet: None,
            r0: None,
            logistic: None,
            poisson: None,
            validation: None,
            baseline: None,
            comparison: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub samples: usize,
    pub resolution: f64,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterCount {
    pub mg: usize,
    pub clusters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeclusterSummary {
    /// Raw-sample quantile under which candidate clusters are formed.
    pub screen_threshold: f64,
    pub runs: Vec<ClusterCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub u: Option<f64>,
    /// False when the threshold was fixed by configuration.
    pub selected: bool,
    pub selection: Option<ThresholdSelection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginFit {
    pub u: f64,
    pub mg: usize,
    pub clusters: usize,
    /// Fraction of raw samples below the threshold.
    pub zeta_hat: f64,
    pub fit: GpdFit,
    pub params: GpdParams,
    pub pp_max_deviation: f64,
    pub pp_rmse: f64,
    pub qq_max_deviation: f64,
    pub qq_rmse: f64,
    pub beyond_endpoint: usize,
    pub pp_pass: bool,
    /// MRL linearity at and below the threshold, when it was selected.
    pub mrl_r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSummary {
    pub window_len: usize,
    pub windows: usize,
    pub pairs: usize,
    pub rho_total: f64,
    pub diversity: DiversityDecision,
    /// Correlation of the aligned pairs in dBm.
    pub rho_tail: Option<f64>,
    pub tail_dependence_needed: Option<bool>,
    /// Margins refitted on the aligned pairs only.
    pub refit: Option<PerReceiver<GpdFit>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrechetSummary {
    pub zeta_mode: ZetaMode,
    pub params: PerReceiver<GpdParams>,
    pub ks: PerReceiver<f64>,
    pub capped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct R0Summary {
    pub r0: f64,
    pub retained: usize,
    pub statistic: f64,
    pub critical: f64,
    /// True when no cut-off met `critical` and the noise-level fallback was used.
    pub relaxed: bool,
    pub profile: Vec<R0Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticSummary {
    /// Correlation of `ln x`, `ln y` on the Fréchet scale.
    pub rho_frechet_log: f64,
    pub from_rho: Result<LogisticModel, String>,
    pub mle: LogisticModel,
    pub mle_mixed_partial: LogisticModel,
    /// Mixed-partial fit on the points beyond the radial cut-off.
    pub mle_mixed_partial_retained: Option<LogisticModel>,
    /// Model used downstream.
    pub selected: LogisticModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonSummary {
    pub r0: f64,
    pub atoms: usize,
    pub raw_mean: f64,
    pub symmetrized_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub uniformity: UniformityCheck,
    pub h_l_mean: f64,
    pub h_l_mu: f64,
    pub h_l_r_dependence_cv: f64,
    pub h_l_mean_check: MeanConstraint,
    pub h_pp_raw_mean_check: MeanConstraint,
    pub h_pp_symmetrized_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub margins: PerReceiver<MarginRanking>,
    pub gaussian: BivariateGaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub nodes_per_axis: usize,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub rmse_logistic: f64,
    pub rmse_poisson: f64,
    pub rmse_gaussian: f64,
    /// Largest pointwise gap between the two tail models on the grid.
    pub sup_logistic_vs_poisson: f64,
}
