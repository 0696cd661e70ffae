//! Python bindings: the main types as classes, the model functions as
//! plain functions and the pipeline returning the JSON report.

use std::path::PathBuf;

use bivtail::config::Config;
use bivtail::pipeline::{self, Stage};
use bivtail::transforms::{FrechetPair, PickandsPoint};
use bivtail::{baseline, decluster, gpd, io, logistic, poisson, series, synth, transforms, ugpd, validation, Error};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(pybivtail, BivtailError, PyException, "Numerical or data failure.");
create_exception!(pybivtail, StageError, BivtailError, "A pipeline stage failed; `args[0]` names it.");

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::Config(_) | Error::Parse { .. } => PyValueError::new_err(e.to_string()),
        Error::Stage { stage, .. } => StageError::new_err((stage, e.to_string())),
        other => BivtailError::new_err(other.to_string()),
    }
}

fn pairs(xs: &[f64], ys: &[f64]) -> PyResult<Vec<FrechetPair>> {
    if xs.len() != ys.len() {
        return Err(PyValueError::new_err("x and y must have the same length"));
    }
    xs.iter()
        .zip(ys)
        .enumerate()
        .map(|(i, (&x, &y))| FrechetPair::new(x, y, i as i64).map_err(to_py))
        .collect()
}

fn points(r: &[f64], omega: &[f64]) -> PyResult<Vec<PickandsPoint>> {
    if r.len() != omega.len() {
        return Err(PyValueError::new_err("r and omega must have the same length"));
    }
    Ok(r.iter().zip(omega).map(|(&r, &omega)| PickandsPoint { omega, r }).collect())
}

/// Generalized Pareto tail of the fade depth `u - x`.
#[pyclass(name = "GpdParams", module = "pybivtail", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyGpdParams(gpd::GpdParams);

#[pymethods]
impl PyGpdParams {
    #[new]
    #[pyo3(signature = (xi, sigma_tilde, u = 0.0, zeta = 1.0))]
    fn new(xi: f64, sigma_tilde: f64, u: f64, zeta: f64) -> PyResult<Self> {
        gpd::GpdParams::new(xi, sigma_tilde, u, zeta).map(Self).map_err(to_py)
    }
    #[getter]
    fn xi(&self) -> f64 {
        self.0.xi
    }
    #[getter]
    fn sigma_tilde(&self) -> f64 {
        self.0.sigma_tilde
    }
    #[getter]
    fn u(&self) -> f64 {
        self.0.u
    }
    #[getter]
    fn zeta(&self) -> f64 {
        self.0.zeta
    }
    fn cdf(&self, depth: f64) -> PyResult<f64> {
        gpd::gpd_cdf(depth, &self.0).map_err(to_py)
    }
    fn quantile(&self, p: f64) -> PyResult<f64> {
        gpd::gpd_quantile(p, &self.0).map_err(to_py)
    }
    fn support_endpoint(&self) -> f64 {
        gpd::gpd_support_endpoint(&self.0)
    }
    /// Unit-Fréchet value of a dBm level below the threshold.
    fn frechet(&self, x_dbm: f64) -> PyResult<f64> {
        transforms::frechet_transform(x_dbm, &self.0).map_err(to_py)
    }
    fn __repr__(&self) -> String {
        let p = self.0;
        format!("GpdParams(xi={}, sigma_tilde={}, u={}, zeta={})", p.xi, p.sigma_tilde, p.u, p.zeta)
    }
}

#[pyclass(name = "GpdFit", module = "pybivtail", frozen)]
struct PyGpdFit(ugpd::GpdFit);

#[pymethods]
impl PyGpdFit {
    #[getter]
    fn params(&self) -> PyGpdParams {
        PyGpdParams(self.0.params)
    }
    #[getter]
    fn xi_se(&self) -> f64 {
        self.0.xi_se
    }
    #[getter]
    fn sigma_se(&self) -> f64 {
        self.0.sigma_se
    }
    #[getter]
    fn loglik(&self) -> f64 {
        self.0.loglik
    }
    #[getter]
    fn converged(&self) -> bool {
        self.0.converged
    }
    fn __repr__(&self) -> String {
        let p = self.0.params;
        format!("GpdFit(xi={} ± {}, sigma_tilde={} ± {})", p.xi, self.0.xi_se, p.sigma_tilde, self.0.sigma_se)
    }
}

/// Symmetric logistic dependence with parameter `alpha` in (0, 1].
#[pyclass(name = "LogisticModel", module = "pybivtail", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyLogisticModel(logistic::LogisticModel);

#[pymethods]
impl PyLogisticModel {
    #[new]
    fn new(alpha: f64) -> PyResult<Self> {
        logistic::LogisticModel::new(alpha).map(Self).map_err(to_py)
    }
    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha
    }
    #[getter]
    fn loglik(&self) -> Option<f64> {
        self.0.loglik
    }
    /// Exponent measure.
    fn v(&self, x: f64, y: f64) -> f64 {
        logistic::v_logistic(x, y, self.0.alpha)
    }
    /// Joint CDF on the Fréchet scale.
    fn g(&self, x: f64, y: f64) -> f64 {
        logistic::g_logistic(x, y, &self.0)
    }
    fn mixed_partial(&self, x: f64, y: f64) -> f64 {
        logistic::logistic_mixed_partial(x, y, self.0.alpha)
    }
    fn angular_density(&self, omega: f64) -> f64 {
        logistic::angular_density(omega, self.0.alpha)
    }
    fn __repr__(&self) -> String {
        format!("LogisticModel(alpha={})", self.0.alpha)
    }
}

/// Discrete angular measure of the Poisson-process model.
#[pyclass(name = "AngularMeasure", module = "pybivtail", frozen)]
struct PyAngularMeasure(poisson::AngularMeasure);

#[pymethods]
impl PyAngularMeasure {
    /// From angles directly, each carrying equal mass.
    #[staticmethod]
    #[pyo3(signature = (omegas, symmetrize = true))]
    fn from_angles(omegas: Vec<f64>, symmetrize: bool) -> PyResult<Self> {
        poisson::angular_measure_from_angles(&omegas, symmetrize).map(Self).map_err(to_py)
    }
    /// From Pickands points with radius beyond `r0`.
    #[staticmethod]
    #[pyo3(signature = (r, omega, r0, symmetrize = true))]
    fn from_points(r: Vec<f64>, omega: Vec<f64>, r0: f64, symmetrize: bool) -> PyResult<Self> {
        poisson::estimate_angular_measure(&points(&r, &omega)?, r0, symmetrize).map(Self).map_err(to_py)
    }
    #[getter]
    fn omegas(&self) -> Vec<f64> {
        self.0.atoms.iter().map(|a| a.omega).collect()
    }
    #[getter]
    fn masses(&self) -> Vec<f64> {
        self.0.atoms.iter().map(|a| a.mass).collect()
    }
    fn mean(&self) -> f64 {
        self.0.mean()
    }
    fn exponent_measure(&self, x: f64, y: f64) -> f64 {
        poisson::exponent_measure(x, y, &self.0)
    }
    fn g(&self, x: f64, y: f64) -> f64 {
        poisson::g_poisson(x, y, &self.0)
    }
    fn __len__(&self) -> usize {
        self.0.atoms.len()
    }
}

#[pyfunction]
fn fit_gpd_mle(excesses: Vec<f64>) -> PyResult<PyGpdFit> {
    ugpd::fit_gpd_mle(&excesses).map(PyGpdFit).map_err(to_py)
}

/// Clusters below `u` as `(start, end, min_index, minimum)` tuples.
#[pyfunction]
#[pyo3(signature = (values, u, mg = 2))]
fn decluster_values(values: Vec<f64>, u: f64, mg: usize) -> PyResult<Vec<(i64, i64, i64, f64)>> {
    let s = series::PowerSeries::from_values(&values, 1.0).map_err(to_py)?;
    Ok(decluster::decluster(&s, u, mg)
        .into_iter()
        .map(|c| (c.start, c.end, c.min_index, c.minimum))
        .collect())
}

/// `(x, y)` lists of exact logistic pairs on unit Fréchet margins.
#[pyfunction]
fn gen_bivariate_logistic_frechet(alpha: f64, n: usize, seed: u64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let p = synth::gen_bivariate_logistic_frechet(alpha, n, seed).map_err(to_py)?;
    Ok((p.iter().map(|q| q.x_tilde).collect(), p.iter().map(|q| q.y_tilde).collect()))
}

#[pyfunction]
#[pyo3(signature = (x, y, mixed_partial = false))]
fn fit_alpha_mle(x: Vec<f64>, y: Vec<f64>, mixed_partial: bool) -> PyResult<PyLogisticModel> {
    let p = pairs(&x, &y)?;
    let m = if mixed_partial {
        logistic::fit_alpha_mle_mixed_partial(&p)
    } else {
        logistic::fit_alpha_mle(&p)
    };
    m.map(PyLogisticModel).map_err(to_py)
}

#[pyfunction]
fn alpha_from_rho(rho: f64) -> PyResult<PyLogisticModel> {
    logistic::alpha_from_rho(rho).map(PyLogisticModel).map_err(to_py)
}

/// `(r, omega)` with `r = -1 / (x + y)`: extremes sit near `r = 0`.
#[pyfunction]
fn extremal_pickands_transform(x: Vec<f64>, y: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let pts: Vec<PickandsPoint> = pairs(&x, &y)?.iter().map(transforms::extremal_pickands_transform).collect();
    Ok((pts.iter().map(|p| p.r).collect(), pts.iter().map(|p| p.omega).collect()))
}

/// `(r0, retained, statistic)`.
#[pyfunction]
#[pyo3(signature = (r, omega, critical = 0.05))]
fn select_r0(r: Vec<f64>, omega: Vec<f64>, critical: f64) -> PyResult<(f64, usize, f64)> {
    let s = validation::select_r0(&points(&r, &omega)?, critical).map_err(to_py)?;
    Ok((s.r0, s.retained, s.statistic))
}

/// `(passes, max_deviation, bound)`.
#[pyfunction]
fn radial_uniformity(r: Vec<f64>, omega: Vec<f64>, r0: f64) -> PyResult<(bool, f64, f64)> {
    let u = validation::radial_uniformity(&points(&r, &omega)?, r0).map_err(to_py)?;
    Ok((u.pass, u.max_deviation, u.bound))
}

#[pyfunction]
fn frechet_margin_ks(values: Vec<f64>) -> f64 {
    transforms::frechet_margin_ks(&values)
}

#[pyfunction]
fn bivariate_normal_cdf(a: f64, b: f64, rho: f64) -> f64 {
    baseline::bivariate_normal_cdf(a, b, rho)
}

/// Configuration defaults as TOML text.
#[pyfunction]
fn default_config() -> PyResult<String> {
    Config::default().to_toml_string().map_err(to_py)
}

fn parse_stage(name: &str) -> PyResult<Stage> {
    Stage::ALL
        .into_iter()
        .find(|s| s.name() == name)
        .ok_or_else(|| {
            let known: Vec<&str> = Stage::ALL.iter().map(|s| s.name()).collect();
            PyValueError::new_err(format!("unknown stage `{name}`; known: {}", known.join(", ")))
        })
}

/// Synthetic traces from the `synth` settings of a TOML configuration,
/// as `(t, rx1_dbm, rx2_dbm)` lists.
#[pyfunction]
#[pyo3(signature = (config = ""))]
fn synth_traces(config: &str) -> PyResult<(Vec<i64>, Vec<f64>, Vec<f64>)> {
    let cfg = Config::from_toml_str(config).map_err(to_py)?;
    let s = pipeline::synth_from_config(&cfg).map_err(to_py)?;
    Ok((s.x.samples().iter().map(|p| p.t).collect(), s.x.values(), s.y.values()))
}

/// Runs the analysis and returns the JSON report.
///
/// Reads traces from `input` (CSV) or generates them from the `synth`
/// settings when `input` is None. `stages` defaults to every stage. With
/// `out_dir`, the plot-data CSVs are written there. A failing stage raises
/// `StageError(stage, message)`.
#[pyfunction]
#[pyo3(signature = (config = "", input = None, stages = None, out_dir = None))]
fn run_pipeline(
    py: Python<'_>,
    config: &str,
    input: Option<PathBuf>,
    stages: Option<Vec<String>>,
    out_dir: Option<PathBuf>,
) -> PyResult<String> {
    let cfg = Config::from_toml_str(config).map_err(to_py)?;
    let targets = match stages {
        Some(names) => names.iter().map(|n| parse_stage(n)).collect::<PyResult<Vec<_>>>()?,
        None => Stage::ALL.to_vec(),
    };
    py.detach(|| {
        let (x, y, source, truth) = match &input {
            Some(p) => {
                let (x, y) = io::ingest(p, cfg.resolution).map_err(|e| e.at_stage("ingest"))?;
                (x, y, p.display().to_string(), None)
            }
            None => {
                let s = pipeline::synth_from_config(&cfg)?;
                (s.x, s.y, "synth".to_string(), Some(s.truth))
            }
        };
        let run = pipeline::run_pipeline(&cfg, &x, &y, &targets, &source, truth).map_err(|f| f.error)?;
        if let Some(dir) = &out_dir {
            std::fs::create_dir_all(dir)?;
            for t in &run.plots {
                t.save(dir)?;
            }
        }
        Ok(run.report.to_json())
    })
    .map_err(to_py)
}

#[pymodule]
fn pybivtail(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("BivtailError", m.py().get_type::<BivtailError>())?;
    m.add("StageError", m.py().get_type::<StageError>())?;
    m.add("REPORT_SCHEMA_VERSION", bivtail::report::REPORT_SCHEMA_VERSION)?;
    m.add_class::<PyGpdParams>()?;
    m.add_class::<PyGpdFit>()?;
    m.add_class::<PyLogisticModel>()?;
    m.add_class::<PyAngularMeasure>()?;
    m.add_function(wrap_pyfunction!(fit_gpd_mle, m)?)?;
    m.add_function(wrap_pyfunction!(decluster_values, m)?)?;
    m.add_function(wrap_pyfunction!(gen_bivariate_logistic_frechet, m)?)?;
    m.add_function(wrap_pyfunction!(fit_alpha_mle, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_from_rho, m)?)?;
    m.add_function(wrap_pyfunction!(extremal_pickands_transform, m)?)?;
    m.add_function(wrap_pyfunction!(select_r0, m)?)?;
    m.add_function(wrap_pyfunction!(radial_uniformity, m)?)?;
    m.add_function(wrap_pyfunction!(frechet_margin_ks, m)?)?;
    m.add_function(wrap_pyfunction!(bivariate_normal_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(synth_traces, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
