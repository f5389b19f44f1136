//! Python bindings: statistics, calibrated tests and power estimates.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use gofit::calibrate::{critical_value, upper_quantile};
use gofit::edf::edf_statistics;
use gofit::multinormal::{mardia_statistics, MardiaMode};
use gofit::powerlab::{estimate_power, resolve_hypothesis, run_study, ContaminationModel, StudyConfig};
use gofit::region::{region_statistic, RegionWeights};
use gofit::smooth::{neyman_statistic, SmoothConfig};
use gofit::{GofError, Sample, Tail};

fn err(e: GofError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Accepts a flat sequence (1-D data) or a sequence of rows.
fn to_sample(data: &Bound<'_, PyAny>) -> PyResult<Sample> {
    if let Ok(rows) = data.extract::<Vec<Vec<f64>>>() {
        return Sample::from_points(&rows).map_err(err);
    }
    let values: Vec<f64> = data.extract()?;
    Sample::univariate(values).map_err(err)
}

fn sorted_unit(mut z: Vec<f64>) -> Vec<f64> {
    z.sort_by(f64::total_cmp);
    z
}

fn parse_tail(tail: &str) -> PyResult<Tail> {
    match tail {
        "upper" => Ok(Tail::Upper),
        "lower" => Ok(Tail::Lower),
        "two-sided" | "two_sided" => Ok(Tail::TwoSided),
        _ => Err(PyValueError::new_err(format!("tail must be upper|lower|two-sided, got `{tail}`"))),
    }
}

/// EDF statistics of PIT values in [0, 1] (sorted internally).
#[pyfunction]
fn edf<'py>(py: Python<'py>, z: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let s = edf_statistics(&sorted_unit(z)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("d_plus", s.d_plus)?;
    d.set_item("d_minus", s.d_minus)?;
    d.set_item("d", s.d)?;
    d.set_item("v", s.v)?;
    d.set_item("w2", s.w2)?;
    d.set_item("a2", s.a2)?;
    d.set_item("u2", s.u2)?;
    d.set_item("clamped", s.clamped)?;
    Ok(d)
}

/// Neyman's smooth statistic of order k on PIT values.
#[pyfunction]
#[pyo3(signature = (z, k = 2))]
fn neyman(z: Vec<f64>, k: usize) -> PyResult<f64> {
    let cfg = SmoothConfig::new(k).map_err(err)?;
    neyman_statistic(&z, cfg).map_err(err)
}

/// Region statistic on PIT values; returns (value, cuts, counts).
#[pyfunction]
#[pyo3(signature = (z, weights = "unit", regions = 3))]
fn region(z: Vec<f64>, weights: &str, regions: usize) -> PyResult<(f64, Vec<f64>, Vec<usize>)> {
    let w = match weights {
        "unit" => RegionWeights::Unit,
        "chi" => RegionWeights::InverseExpectation,
        _ => return Err(PyValueError::new_err("weights must be unit|chi")),
    };
    let r = region_statistic(&sorted_unit(z), w, regions).map_err(err)?;
    let cuts = r.partition.cuts.iter().map(|c| c.position).collect();
    Ok((r.value, cuts, r.partition.counts))
}

/// Mardia's (b1, b2) with sample-estimated mean and covariance.
#[pyfunction]
fn mardia(data: &Bound<'_, PyAny>) -> PyResult<(f64, f64)> {
    let s = to_sample(data)?;
    let m = mardia_statistics(&s, MardiaMode::Estimated).map_err(err)?;
    Ok((m.b1, m.b2))
}

/// Monte Carlo null distribution of a statistic.
#[pyclass(name = "NullDistribution", frozen)]
struct PyNull {
    inner: gofit::NullDistribution,
}

#[pymethods]
impl PyNull {
    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }
    #[getter]
    fn replicas(&self) -> usize {
        self.inner.replicas()
    }
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }
    #[getter]
    fn config_digest(&self) -> String {
        self.inner.config_digest().to_string()
    }
    #[pyo3(signature = (observed, tail = "upper"))]
    fn p_value(&self, observed: f64, tail: &str) -> PyResult<f64> {
        gofit::p_value(&self.inner, observed, parse_tail(tail)?).map_err(err)
    }
    /// Guarded critical value (needs replicas · alpha ≥ 5).
    fn critical_value(&self, alpha: f64) -> PyResult<f64> {
        critical_value(&self.inner, alpha).map_err(err)
    }
    fn upper_quantile(&self, alpha: f64) -> PyResult<f64> {
        upper_quantile(&self.inner, alpha).map_err(err)
    }
    fn to_text(&self) -> String {
        self.inner.to_text()
    }
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(PyNull {
            inner: gofit::NullDistribution::from_text(text).map_err(err)?,
        })
    }
    fn __len__(&self) -> usize {
        self.inner.replicas()
    }
    fn __repr__(&self) -> String {
        format!(
            "NullDistribution({}, replicas={}, seed={})",
            self.inner.statistic_name(),
            self.inner.replicas(),
            self.inner.seed()
        )
    }
}

/// A statistic bound to a null hypothesis and a sample size.
#[pyclass(name = "Test", frozen)]
struct PyTest {
    inner: gofit::GofTest,
}

#[pymethods]
impl PyTest {
    #[new]
    #[pyo3(signature = (statistic, hypothesis, n, seed = 0))]
    fn new(statistic: &str, hypothesis: &str, n: usize, seed: u64) -> PyResult<Self> {
        let st = gofit::Statistic::parse(statistic).map_err(err)?;
        let h0 = resolve_hypothesis(hypothesis, seed).map_err(err)?;
        Ok(PyTest {
            inner: gofit::GofTest::new(st, h0, n, seed).map_err(err)?,
        })
    }
    #[getter]
    fn statistic(&self) -> String {
        self.inner.statistic().to_string()
    }
    #[getter]
    fn config(&self) -> String {
        self.inner.config()
    }
    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }
    fn evaluate(&self, data: &Bound<'_, PyAny>) -> PyResult<f64> {
        let s = to_sample(data)?;
        self.inner.evaluate(&s).map_err(err)
    }
    #[pyo3(signature = (replicas, seed = 0))]
    fn calibrate(&self, py: Python<'_>, replicas: usize, seed: u64) -> PyResult<PyNull> {
        let inner = py
            .detach(|| self.inner.build_null(replicas, seed))
            .map_err(err)?;
        Ok(PyNull { inner })
    }
    /// Value, p-value and decision as a dict.
    #[pyo3(signature = (data, null, alpha = 0.05))]
    fn run<'py>(
        &self,
        py: Python<'py>,
        data: &Bound<'py, PyAny>,
        null: &PyNull,
        alpha: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let s = to_sample(data)?;
        let o = self.inner.outcome(&s, Some(&null.inner), Some(alpha)).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("statistic", &o.statistic_name)?;
        d.set_item("value", o.value)?;
        d.set_item("p_value", o.p_value)?;
        d.set_item("replicas", o.replicas)?;
        d.set_item("seed", o.seed)?;
        d.set_item("reject", o.reject_at.map(|r| r.1))?;
        Ok(d)
    }
    fn __repr__(&self) -> String {
        format!("Test({})", self.inner.config())
    }
}

/// Power of a test against a named contamination model.
#[pyfunction]
#[pyo3(signature = (statistic, hypothesis, model, fraction, n, alpha = 0.05, trials = 400, replicas = 999, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn power<'py>(
    py: Python<'py>,
    statistic: &str,
    hypothesis: &str,
    model: &str,
    fraction: f64,
    n: usize,
    alpha: f64,
    trials: usize,
    replicas: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let st = gofit::Statistic::parse(statistic).map_err(err)?;
    let h0 = resolve_hypothesis(hypothesis, seed).map_err(err)?;
    let test = gofit::GofTest::new(st, h0, n, seed).map_err(err)?;
    let m = ContaminationModel::named(model, fraction).map_err(err)?;
    let row = py
        .detach(|| estimate_power(&test, &m, alpha, trials, replicas, seed))
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("statistic", row.statistic)?;
    d.set_item("contamination", row.contamination)?;
    d.set_item("fraction", row.fraction)?;
    d.set_item("n", row.n)?;
    d.set_item("power", row.power)?;
    d.set_item("sigma", row.sigma)?;
    d.set_item("trials", row.trials)?;
    Ok(d)
}

/// Runs a TOML study description and returns the power table as TSV.
#[pyfunction]
fn study(py: Python<'_>, config: &str) -> PyResult<String> {
    let cfg = StudyConfig::from_toml(config).map_err(err)?;
    let table = py.detach(|| run_study(&cfg)).map_err(err)?;
    Ok(table.to_tsv())
}

#[pymodule]
pub fn pygofit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("STATISTICS", gofit::statistic::STATISTIC_NAMES.to_vec())?;
    m.add_function(wrap_pyfunction!(edf, m)?)?;
    m.add_function(wrap_pyfunction!(neyman, m)?)?;
    m.add_function(wrap_pyfunction!(region, m)?)?;
    m.add_function(wrap_pyfunction!(mardia, m)?)?;
    m.add_function(wrap_pyfunction!(power, m)?)?;
    m.add_function(wrap_pyfunction!(study, m)?)?;
    m.add_class::<PyTest>()?;
    m.add_class::<PyNull>()?;
    Ok(())
}
