use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use ringmix_core::error::Error;
use ringmix_core::graph::{InstanceSpec, PerturbedCycle};
use ringmix_core::kernel::WalkParams;
use ringmix_core::mixing::{ProfileOptions, StartSet};
use ringmix_core::{kernel, mixing, spread, walker};

fn err(e: Error) -> PyErr {
    match e {
        Error::NotMixed { .. } | Error::Runaway { .. } | Error::Campaign { .. } | Error::Degenerate(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Hand a serializable value to Python as plain dicts and lists.
fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (s,))?.unbind())
}

fn starts(s: Option<&str>, n: usize) -> PyResult<StartSet> {
    match s {
        Some(s) => s.parse().map_err(err),
        None => Ok(StartSet::default_for(n)),
    }
}

/// A cycle `Z_n` with `k` chords forming a perfect matching on distinct hubs.
#[pyclass(name = "Instance", module = "ringmix", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyInstance {
    g: PerturbedCycle,
}

#[pymethods]
impl PyInstance {
    #[new]
    #[pyo3(signature = (n, edges = Vec::new()))]
    fn new(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        PerturbedCycle::from_edges(n, &edges).map(|g| PyInstance { g }).map_err(err)
    }

    #[staticmethod]
    fn random(n: usize, k: usize, seed: u64) -> PyResult<Self> {
        ringmix_core::sample_instance(n, k, seed).map(|g| PyInstance { g }).map_err(err)
    }

    /// Accepts `n=.. k=.. seed=..`, `n=.. edges=u-v,..` or a canonical line.
    #[staticmethod]
    fn parse(spec: &str) -> PyResult<Self> {
        let spec: InstanceSpec = spec.parse().map_err(err)?;
        ringmix_core::from_spec(&spec).map(|g| PyInstance { g }).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.g.n()
    }

    #[getter]
    fn k(&self) -> usize {
        self.g.k()
    }

    #[getter]
    fn hubs(&self) -> Vec<usize> {
        self.g.hubs().to_vec()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.g.edges().iter().map(|&(a, b)| (self.g.hubs()[a], self.g.hubs()[b])).collect()
    }

    #[getter]
    fn lengths(&self) -> Vec<i64> {
        self.g.lengths().to_vec()
    }

    #[getter]
    fn arcs(&self) -> Vec<usize> {
        self.g.arcs().to_vec()
    }

    #[pyo3(signature = (threshold = None))]
    fn check_b1(&self, threshold: Option<f64>) -> bool {
        self.g.check_b1(threshold)
    }

    fn __str__(&self) -> String {
        self.g.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Instance('{}')", self.g)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.g == other.g
    }
}

#[pyclass(name = "WalkParams", module = "ringmix", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyWalkParams {
    w: WalkParams,
}

#[pymethods]
impl PyWalkParams {
    #[new]
    #[pyo3(signature = (p = 0.5, q = 0.25, a = 0.25))]
    fn new(p: f64, q: f64, a: f64) -> PyResult<Self> {
        WalkParams::new(p, q, a).map(|w| PyWalkParams { w }).map_err(err)
    }

    #[getter]
    fn p(&self) -> f64 {
        self.w.p
    }

    #[getter]
    fn q(&self) -> f64 {
        self.w.q
    }

    #[getter]
    fn a(&self) -> f64 {
        self.w.a
    }

    fn __repr__(&self) -> String {
        format!("WalkParams(p={}, q={}, a={})", self.w.p, self.w.q, self.w.a)
    }
}

#[pyfunction]
fn transition_row(g: &PyInstance, w: &PyWalkParams, v: usize) -> PyResult<Vec<(usize, f64)>> {
    kernel::transition_row(&g.g, &w.w, v).map_err(err)
}

#[pyfunction]
fn step_distribution(g: &PyInstance, w: &PyWalkParams, dist: Vec<f64>) -> PyResult<Vec<f64>> {
    kernel::step_distribution(&g.g, &w.w, &kernel::DistVector(dist)).map(|d| d.0).map_err(err)
}

#[pyfunction]
fn tv_to_uniform(dist: Vec<f64>) -> f64 {
    mixing::tv_to_uniform(&dist)
}

/// Least `t` with worst-case distance to uniform at most `eps`.
#[pyfunction]
#[pyo3(signature = (g, w, eps = 0.25, starts = None, t_max = None))]
fn mixing_time(
    py: Python<'_>,
    g: &PyInstance,
    w: &PyWalkParams,
    eps: f64,
    starts: Option<&str>,
    t_max: Option<u64>,
) -> PyResult<u64> {
    let s = self::starts(starts, g.g.n())?;
    py.detach(|| mixing::mixing_time_within(&g.g, &w.w, eps, s, t_max)).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (g, w, eps = vec![0.25], starts = None, t_max = None, record_every = None))]
fn distance_profile(
    py: Python<'_>,
    g: &PyInstance,
    w: &PyWalkParams,
    eps: Vec<f64>,
    starts: Option<&str>,
    t_max: Option<u64>,
    record_every: Option<u64>,
) -> PyResult<Py<PyAny>> {
    let s = self::starts(starts, g.g.n())?;
    let opts = ProfileOptions { t_max, record_every, eps };
    let prof = py.detach(|| mixing::distance_profile(&g.g, &w.w, s, &opts)).map_err(err)?;
    to_py(py, &prof)
}

#[pyfunction]
fn exponent_fit(points: Vec<(f64, f64)>) -> PyResult<(f64, f64, f64)> {
    let f = mixing::exponent_fit(&points).map_err(err)?;
    Ok((f.slope, f.intercept, f.residual))
}

#[pyfunction]
#[pyo3(name = "run_track")]
fn run_track_py(
    py: Python<'_>,
    g: &PyInstance,
    w: &PyWalkParams,
    x0: usize,
    travel: u64,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let s = walker::run_track(&g.g, &w.w, x0, travel, seed).map_err(err)?;
    to_py(py, &s)
}

#[pyfunction]
fn estimate_decisions(
    py: Python<'_>,
    g: &PyInstance,
    w: &PyWalkParams,
    hub: usize,
    trials: u64,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let e = walker::estimate_decisions(&g.g, &w.w, hub, trials, seed).map_err(err)?;
    to_py(py, &e)
}

#[pyfunction]
fn pg_closed_form(w: &PyWalkParams) -> PyResult<(f64, f64)> {
    walker::pg_closed_form(&w.w).map_err(err)
}

#[pyfunction]
fn absorption_oracle(w: &PyWalkParams, arm: usize) -> PyResult<(f64, f64)> {
    walker::absorption_oracle(&w.w, arm).map_err(err)
}

/// `(escape probabilities for b = 0..=max_b, expected hitting time of +1)`.
#[pyfunction]
#[pyo3(signature = (w, max_b = 10))]
fn gambler_facts(w: &PyWalkParams, max_b: u32) -> PyResult<(Vec<f64>, f64)> {
    let f = walker::gambler_facts(&w.w).map_err(err)?;
    Ok(((0..=max_b).map(|b| f.escape_prob(b)).collect(), f.expected_tau1))
}

#[pyfunction]
fn conditional_endpoint_spread(
    py: Python<'_>,
    g: &PyInstance,
    w: &PyWalkParams,
    x0: usize,
    time: u64,
    trials: u64,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let s = py
        .detach(|| walker::conditional_endpoint_spread(&g.g, &w.w, x0, time, trials, seed))
        .map_err(err)?;
    to_py(py, &s)
}

#[pyfunction]
fn f_l(y: Vec<i64>, l: Vec<i64>, n: usize) -> PyResult<usize> {
    spread::f_l(&y, &l, n).map_err(err)
}

#[pyfunction]
fn min_nonzero_distance(l: Vec<i64>, n: usize, m: usize) -> PyResult<(usize, Vec<i64>)> {
    spread::min_nonzero_distance(&l, n, m).map_err(err)
}

#[pyfunction]
fn window_hit_count(l: Vec<i64>, n: usize, m: usize, alpha: f64) -> PyResult<u64> {
    spread::window_hit_count(&l, n, m, alpha).map_err(err)
}

#[pyfunction]
fn expected_window_hits(n: usize, k: usize, m: usize, alpha: f64) -> PyResult<f64> {
    spread::expected_window_hits(n, k, m, alpha).map_err(err)
}

/// `signs` is a list of +1/-1 per edge, or None for every sign.
#[pyfunction]
#[pyo3(signature = (g, travel, m, signs = None))]
fn xi_set(g: &PyInstance, travel: i64, m: usize, signs: Option<Vec<i8>>) -> PyResult<Vec<usize>> {
    let pattern = match signs {
        Some(s) => spread::SignPattern::Signs(s),
        None => spread::SignPattern::All,
    };
    spread::xi_set(&g.g, travel, m, &pattern).map_err(err)
}

#[pyfunction]
fn gap_stats(py: Python<'_>, points: Vec<usize>, n: usize) -> PyResult<Py<PyAny>> {
    let s = spread::gap_stats(&points, n).map_err(err)?;
    to_py(py, &s)
}

#[pymodule]
fn ringmix(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_class::<PyWalkParams>()?;
    m.add_function(wrap_pyfunction!(transition_row, m)?)?;
    m.add_function(wrap_pyfunction!(step_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(tv_to_uniform, m)?)?;
    m.add_function(wrap_pyfunction!(mixing_time, m)?)?;
    m.add_function(wrap_pyfunction!(distance_profile, m)?)?;
    m.add_function(wrap_pyfunction!(exponent_fit, m)?)?;
    m.add_function(wrap_pyfunction!(run_track_py, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_decisions, m)?)?;
    m.add_function(wrap_pyfunction!(pg_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(absorption_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(gambler_facts, m)?)?;
    m.add_function(wrap_pyfunction!(conditional_endpoint_spread, m)?)?;
    m.add_function(wrap_pyfunction!(f_l, m)?)?;
    m.add_function(wrap_pyfunction!(min_nonzero_distance, m)?)?;
    m.add_function(wrap_pyfunction!(window_hit_count, m)?)?;
    m.add_function(wrap_pyfunction!(expected_window_hits, m)?)?;
    m.add_function(wrap_pyfunction!(xi_set, m)?)?;
    m.add_function(wrap_pyfunction!(gap_stats, m)?)?;
    Ok(())
}
