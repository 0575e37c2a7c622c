use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIOError, PyValueError};
use pyo3::prelude::*;

use rasch_spectral as core;
use rasch_spectral::baselines;
use rasch_spectral::eval;

create_exception!(pyrasch, EstimationError, PyException, "Estimation is infeasible on the given data.");
create_exception!(pyrasch, UndefinedMetricError, PyException, "The requested metric is undefined.");

fn to_py(e: core::Error) -> PyErr {
    match e {
        core::Error::Io(io) => PyIOError::new_err(io.to_string()),
        e if e.exit_code() == 2 => EstimationError::new_err(e.to_string()),
        e if e.exit_code() == 3 => UndefinedMetricError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn parse_format(format: &str) -> PyResult<core::ResponseFormat> {
    format.parse().map_err(to_py)
}

/// Binary response matrix; rows are users, `None` marks a missing response.
#[pyclass(name = "ResponseMatrix", frozen)]
pub struct PyResponseMatrix {
    inner: core::ResponseMatrix,
}

#[pymethods]
impl PyResponseMatrix {
    #[new]
    #[pyo3(signature = (rows, item_ids=None))]
    fn new(rows: Vec<Vec<Option<u8>>>, item_ids: Option<Vec<String>>) -> PyResult<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut cells = Vec::with_capacity(n * m);
        for row in &rows {
            if row.len() != m {
                return Err(PyValueError::new_err("rows must all have the same length"));
            }
            for v in row {
                cells.push(match v {
                    None => core::Cell::Missing,
                    Some(0) => core::Cell::Zero,
                    Some(1) => core::Cell::One,
                    Some(other) => return Err(PyValueError::new_err(format!("invalid response {other}"))),
                });
            }
        }
        let inner = match item_ids {
            Some(ids) => core::ResponseMatrix::with_item_ids(ids, n, cells),
            None => core::ResponseMatrix::new(n, m, cells),
        }
        .map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Parses file contents in `csv` or `dense-sentinel` format.
    #[staticmethod]
    #[pyo3(signature = (text, format="csv"))]
    fn parse(text: &str, format: &str) -> PyResult<Self> {
        let inner = core::load_responses(text.as_bytes(), parse_format(format)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (path, format="csv"))]
    fn load(path: &str, format: &str) -> PyResult<Self> {
        let file = std::fs::File::open(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        let inner = core::load_responses(std::io::BufReader::new(file), parse_format(format)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[pyo3(signature = (format="csv"))]
    fn dumps(&self, format: &str) -> PyResult<String> {
        let mut out = Vec::new();
        core::save_responses(&self.inner, parse_format(format)?, &mut out).map_err(to_py)?;
        Ok(String::from_utf8(out).expect("ascii output"))
    }

    fn to_rows(&self) -> Vec<Vec<Option<u8>>> {
        self.inner.rows().map(|r| r.iter().map(|c| c.response().map(u8::from)).collect()).collect()
    }

    #[getter]
    fn n_users(&self) -> usize {
        self.inner.n_users()
    }

    #[getter]
    fn n_items(&self) -> usize {
        self.inner.n_items()
    }

    #[getter]
    fn item_ids(&self) -> Vec<String> {
        self.inner.item_ids().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("ResponseMatrix(n_users={}, n_items={})", self.inner.n_users(), self.inner.n_items())
    }
}

#[pyclass(name = "ItemEstimate", frozen, get_all)]
pub struct PyItemEstimate {
    beta: Vec<f64>,
    pi: Vec<f64>,
    d: Vec<f64>,
    method: String,
    iterations: usize,
    residual: f64,
    lazified: bool,
    components: Vec<Vec<usize>>,
}

#[pymethods]
impl PyItemEstimate {
    fn __repr__(&self) -> String {
        format!("ItemEstimate(method={:?}, beta={:?})", self.method, self.beta)
    }
}

#[pyfunction]
#[pyo3(signature = (theta, beta, p, seed))]
fn generate_synthetic(theta: Vec<f64>, beta: Vec<f64>, p: f64, seed: u64) -> PyResult<PyResponseMatrix> {
    let truth = core::GroundTruth::new(theta, beta, p).map_err(to_py)?;
    let inner = core::generate_synthetic(&truth, seed).map_err(to_py)?;
    Ok(PyResponseMatrix { inner })
}

/// Returns `(Y, B)` as nested lists.
#[pyfunction]
#[pyo3(signature = (x, nu=1.0))]
fn pairwise_diff_counts(x: &PyResponseMatrix, nu: f64) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<u64>>)> {
    let s = core::pairwise_diff_counts(&x.inner, nu).map_err(to_py)?;
    Ok((s.y.rows().into_iter().map(|r| r.to_vec()).collect(), s.b.rows().into_iter().map(|r| r.to_vec()).collect()))
}

#[pyfunction]
#[pyo3(signature = (x, nu=1.0, method="accelerated", tol=1e-10, max_iters=100_000, d_override=None))]
fn spectral_estimate(
    x: &PyResponseMatrix,
    nu: f64,
    method: &str,
    tol: f64,
    max_iters: usize,
    d_override: Option<f64>,
) -> PyResult<PyItemEstimate> {
    let cfg = core::EstimatorConfig { nu, method: method.parse().map_err(to_py)?, tol, max_iters, d_override };
    let est = core::spectral_estimate(&x.inner, &cfg).map_err(to_py)?;
    Ok(PyItemEstimate {
        method: est.method.to_string(),
        iterations: est.stationary.iterations,
        residual: est.stationary.residual,
        lazified: est.stationary.lazified,
        components: est.connectivity.components,
        beta: est.beta,
        pi: est.pi,
        d: est.d,
    })
}

#[pyfunction]
#[pyo3(signature = (x, nu=1.0))]
fn rowsum_estimate(x: &PyResponseMatrix, nu: f64) -> PyResult<Vec<f64>> {
    let stats = core::pairwise_diff_counts(&x.inner, nu).map_err(to_py)?;
    let cm = baselines::conditional_ratio_matrix(&stats).map_err(to_py)?;
    baselines::rowsum_estimate(&cm).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (x, nu=1.0, tol=1e-10, max_iters=100_000))]
fn eigenvector_estimate(x: &PyResponseMatrix, nu: f64, tol: f64, max_iters: usize) -> PyResult<Vec<f64>> {
    let stats = core::pairwise_diff_counts(&x.inner, nu).map_err(to_py)?;
    let cm = baselines::conditional_ratio_matrix(&stats).map_err(to_py)?;
    baselines::eigenvector_estimate(&cm, tol, max_iters).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (x, nu=1.0, tol=1e-8, max_iters=10_000))]
fn pmle_estimate(x: &PyResponseMatrix, nu: f64, tol: f64, max_iters: usize) -> PyResult<Vec<f64>> {
    let stats = core::pairwise_diff_counts(&x.inner, nu).map_err(to_py)?;
    Ok(baselines::pmle_mm_estimate(&stats, tol, max_iters).map_err(to_py)?.beta)
}

#[pyfunction]
fn auc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    eval::auc(&scores, &labels).map_err(to_py)
}

#[pyfunction]
fn log_likelihood(x: &PyResponseMatrix, beta: Vec<f64>) -> PyResult<f64> {
    eval::log_likelihood(&x.inner, &beta).map_err(to_py)
}

#[pyfunction]
fn topk_accuracy(beta: Vec<f64>, reference: Vec<usize>, ks: Vec<usize>) -> PyResult<BTreeMap<usize, f64>> {
    eval::topk_accuracy(&beta, &reference, &ks, eval::RankOrder::Descending).map_err(to_py)
}

#[pyfunction]
fn l2_error(beta: Vec<f64>, beta_star: Vec<f64>) -> PyResult<f64> {
    if beta.len() != beta_star.len() {
        return Err(PyValueError::new_err("length mismatch"));
    }
    Ok(eval::l2_error(&beta, &beta_star))
}

#[pyfunction]
fn linf_rel_error(pi: Vec<f64>, pi_star: Vec<f64>) -> PyResult<f64> {
    if pi.len() != pi_star.len() {
        return Err(PyValueError::new_err("length mismatch"));
    }
    Ok(eval::linf_rel_error(&pi, &pi_star))
}

/// Runs the scaling benchmark and returns the report as a JSON string.
#[pyfunction]
#[pyo3(signature = (grid, trials, seed=0, methods="spectral", nu=1.0))]
fn run_benchmark(py: Python<'_>, grid: &str, trials: usize, seed: u64, methods: &str, nu: f64) -> PyResult<String> {
    let mut cfg = eval::BenchmarkConfig::new(
        eval::parse_grid(grid).map_err(to_py)?,
        trials,
        seed,
        eval::parse_methods(methods).map_err(to_py)?,
    );
    cfg.estimator.nu = nu;
    let report = py.detach(|| eval::run_scaling_benchmark(&cfg)).map_err(to_py)?;
    Ok(report.to_json())
}

#[pymodule]
fn pyrasch(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyResponseMatrix>()?;
    m.add_class::<PyItemEstimate>()?;
    m.add("EstimationError", m.py().get_type::<EstimationError>())?;
    m.add("UndefinedMetricError", m.py().get_type::<UndefinedMetricError>())?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(pairwise_diff_counts, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(rowsum_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(eigenvector_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(pmle_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(log_likelihood, m)?)?;
    m.add_function(wrap_pyfunction!(topk_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(l2_error, m)?)?;
    m.add_function(wrap_pyfunction!(linf_rel_error, m)?)?;
    m.add_function(wrap_pyfunction!(run_benchmark, m)?)?;
    Ok(())
}
