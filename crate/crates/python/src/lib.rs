//! Python bindings: metrics, invariants, homogeneity verdicts and scenario runs.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use weylstrat::cli::{run_scenario as run, verify_suite, ScenarioConfig, VerifyOptions};
use weylstrat::geometries::{catalog_entry, Param, Params, CATALOG};
use weylstrat::homogeneity::{ptv_test, HomogeneityReport};
use weylstrat::tensor::{Interval, MetricChart};
use weylstrat::weyl::{console_olmos_map, InvariantCaps, InvariantSpec, SampleGrid, WeylEvaluator};

fn value_error(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A metric on a box-shaped coordinate domain.
#[pyclass(name = "Metric", frozen)]
struct PyMetric {
    chart: Arc<MetricChart>,
}

#[pymethods]
impl PyMetric {
    /// `components` is the packed upper triangle, row by row.
    #[new]
    #[pyo3(signature = (coords, components, domain, label = "chart"))]
    fn new(coords: Vec<String>, components: Vec<String>, domain: Vec<(f64, f64)>, label: &str) -> PyResult<Self> {
        let names: Vec<&str> = coords.iter().map(String::as_str).collect();
        let domain = domain.into_iter().map(|(lo, hi)| Interval::new(lo, hi)).collect();
        let chart = MetricChart::from_text(label, &names, &components, domain).map_err(value_error)?;
        Ok(PyMetric { chart: Arc::new(chart) })
    }

    /// Primary chart of a built-in geometry.
    #[staticmethod]
    #[pyo3(signature = (name, params = None))]
    fn catalog(name: &str, params: Option<HashMap<String, Bound<'_, PyAny>>>) -> PyResult<Self> {
        let mut p = Params::new();
        for (k, v) in params.unwrap_or_default() {
            let v = match v.extract::<f64>() {
                Ok(x) => Param::Number(x),
                Err(_) => Param::Text(v.extract::<String>()?),
            };
            p.insert(k, v);
        }
        let entry = catalog_entry(name, &p).map_err(value_error)?;
        Ok(PyMetric { chart: entry.chart().clone() })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.chart.dim()
    }

    #[getter]
    fn coords(&self) -> Vec<String> {
        self.chart.coords().to_vec()
    }

    #[getter]
    fn label(&self) -> String {
        self.chart.label().to_string()
    }

    #[getter]
    fn components(&self) -> Vec<String> {
        self.chart.upper_components().iter().map(|e| e.to_string()).collect()
    }

    fn metric_at(&self, point: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let g = self.chart.metric_at(&point).map_err(value_error)?;
        Ok(g.row_iter().map(|r| r.iter().copied().collect()).collect())
    }

    fn scalar_curvature(&self, point: Vec<f64>) -> PyResult<f64> {
        let evaluator = WeylEvaluator::new(&self.chart, 0).map_err(value_error)?;
        let w = evaluator.evaluate(&[InvariantSpec::scalar_curvature()], &point).map_err(value_error)?;
        Ok(w[0])
    }

    /// Every invariant up to the caps at one point, keyed by name.
    #[pyo3(signature = (point, max_order = None, max_factors = None))]
    fn invariants<'py>(
        &self,
        py: Python<'py>,
        point: Vec<f64>,
        max_order: Option<usize>,
        max_factors: Option<usize>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let specs = self.specs(max_order, max_factors);
        let order = specs.iter().flat_map(|s| s.factors().iter().copied()).max().unwrap_or(0);
        let evaluator = WeylEvaluator::new(&self.chart, order).map_err(value_error)?;
        let values = evaluator.evaluate(&specs, &point).map_err(value_error)?;
        let out = PyDict::new(py);
        for (s, v) in specs.iter().zip(values) {
            out.set_item(s.to_string(), v)?;
        }
        Ok(out)
    }

    /// Samples the invariants on a grid and tests them for constancy.
    #[pyo3(signature = (density = 20, tolerance = 1e-8, max_order = None, max_factors = None))]
    fn homogeneity(
        &self,
        density: usize,
        tolerance: f64,
        max_order: Option<usize>,
        max_factors: Option<usize>,
    ) -> PyResult<PyHomogeneity> {
        let specs = self.specs(max_order, max_factors);
        let grid = SampleGrid::new(&self.chart, density);
        let field = console_olmos_map(&self.chart, &specs, &grid).map_err(value_error)?;
        let report = ptv_test(&field, tolerance).map_err(value_error)?;
        Ok(PyHomogeneity { flagged_fraction: field.flagged_fraction(), report })
    }

    fn __repr__(&self) -> String {
        format!("Metric({:?}, coords={:?})", self.chart.label(), self.chart.coords())
    }
}

impl PyMetric {
    fn specs(&self, max_order: Option<usize>, max_factors: Option<usize>) -> Vec<InvariantSpec> {
        let caps = InvariantCaps::default_for(self.chart.dim());
        weylstrat::weyl::enumerate_invariants(
            self.chart.dim(),
            max_order.unwrap_or(caps.max_order),
            max_factors.unwrap_or(caps.max_factors),
        )
    }
}

/// Outcome of a constancy test over a sample grid.
#[pyclass(name = "Homogeneity", frozen)]
struct PyHomogeneity {
    report: HomogeneityReport,
    #[pyo3(get)]
    flagged_fraction: f64,
}

#[pymethods]
impl PyHomogeneity {
    /// "locally homogeneous", "not locally homogeneous" or "inconclusive"
    #[getter]
    fn verdict(&self) -> String {
        self.report.verdict.to_string()
    }

    #[getter]
    fn max_spread(&self) -> f64 {
        self.report.max_spread()
    }

    #[getter]
    fn samples(&self) -> usize {
        self.report.samples
    }

    /// Per-invariant `(name, mean, min, max, relative_spread)`.
    #[getter]
    fn invariants(&self) -> Vec<(String, f64, f64, f64, f64)> {
        self.report.invariants.iter().map(|s| (s.name.clone(), s.mean, s.min, s.max, s.relative_spread)).collect()
    }

    fn __repr__(&self) -> String {
        format!("Homogeneity({:?}, max_spread={:e})", self.verdict(), self.max_spread())
    }
}

/// A complete contraction of covariant derivatives of the curvature tensor.
#[pyclass(name = "Invariant", frozen)]
struct PyInvariant {
    spec: InvariantSpec,
}

#[pymethods]
impl PyInvariant {
    #[getter]
    fn name(&self) -> String {
        self.spec.to_string()
    }

    /// Derivative order of each factor.
    #[getter]
    fn factors(&self) -> Vec<usize> {
        self.spec.factors().to_vec()
    }

    #[getter]
    fn pairing(&self) -> Vec<(usize, usize)> {
        self.spec.pairing().to_vec()
    }

    /// `k` such that the invariant of `c·g` is `c^k` times that of `g`.
    #[getter]
    fn scaling_exponent(&self) -> i32 {
        self.spec.scaling_exponent()
    }

    fn __repr__(&self) -> String {
        format!("Invariant({:?})", self.spec.to_string())
    }
}

#[pyfunction]
fn enumerate_invariants(n: usize, max_order: usize, max_factors: usize) -> Vec<PyInvariant> {
    weylstrat::weyl::enumerate_invariants(n, max_order, max_factors).into_iter().map(|spec| PyInvariant { spec }).collect()
}

#[pyfunction]
fn singer_bound(n: usize) -> usize {
    weylstrat::weyl::singer_bound(n)
}

#[pyfunction]
fn list_geometries() -> Vec<(&'static str, &'static str)> {
    CATALOG.to_vec()
}

/// Runs a scenario given as TOML text, writing outputs under `out_dir`.
/// Returns the exit code and the report.
#[pyfunction]
#[pyo3(signature = (config, out_dir, overrides = Vec::new()))]
fn run_scenario<'py>(
    py: Python<'py>,
    config: &str,
    out_dir: PathBuf,
    overrides: Vec<String>,
) -> PyResult<(i32, Bound<'py, PyAny>)> {
    let mut config = ScenarioConfig::from_toml_str(config, &overrides).map_err(value_error)?;
    config.outputs.dir = out_dir;
    let outcome = run(&config).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let json = serde_json::to_string(&outcome.report).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let report = py.import("json")?.call_method1("loads", (json,))?;
    Ok((outcome.exit_code, report))
}

/// The property suite as `(name, passed, detail)` rows.
#[pyfunction]
#[pyo3(signature = (seed = 1))]
fn verify(seed: u64) -> Vec<(&'static str, bool, String)> {
    let options = VerifyOptions { seed, ..VerifyOptions::default() };
    verify_suite(&options).results.into_iter().map(|r| (r.name, r.passed, r.detail)).collect()
}

#[pymodule]
#[pyo3(name = "weylstrat")]
fn weylstrat_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMetric>()?;
    m.add_class::<PyHomogeneity>()?;
    m.add_class::<PyInvariant>()?;
    m.add_function(wrap_pyfunction!(enumerate_invariants, m)?)?;
    m.add_function(wrap_pyfunction!(singer_bound, m)?)?;
    m.add_function(wrap_pyfunction!(list_geometries, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
