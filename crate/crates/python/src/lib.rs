//! Python bindings: `import rarecc`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rarecc_core::harness::{report::write_csv, run_experiment as run_rows, ExperimentConfig};
use rarecc_core::limits::{self, LimitSolution, Rate, RateFunction};
use rarecc_core::methods::{self, MethodResult};
use rarecc_core::{lpsolve, Atom, Error, LinearProgram, LpStatus, Matrix, SampleBatch, TailModel};

fn to_py(e: Error) -> PyErr {
    if e.is_usage() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

#[pyclass(name = "ProblemInstance", module = "rarecc", frozen)]
struct PyProblem {
    inner: rarecc_core::ProblemInstance,
}

#[pymethods]
impl PyProblem {
    /// `A` is a list of `m x n` matrices given as lists of rows.
    #[new]
    #[pyo3(signature = (c, h, a))]
    fn new(c: Vec<f64>, h: f64, a: Vec<Vec<Vec<f64>>>) -> PyResult<Self> {
        let mats = a.iter().map(|rows| Matrix::from_rows(rows)).collect::<Result<Vec<_>, _>>().map_err(to_py)?;
        let inner = rarecc_core::ProblemInstance::new(c, h, mats).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    fn phi(&self, x: Vec<f64>, l: Vec<f64>) -> PyResult<f64> {
        self.inner.phi(&x, &l).map_err(to_py)
    }

    fn objective(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.check_decision(&x).map_err(to_py)?;
        Ok(self.inner.objective(&x))
    }
}

#[pyclass(name = "LightTailModel", module = "rarecc", frozen)]
struct PyLight {
    inner: rarecc_core::LightTailModel,
}

#[pymethods]
impl PyLight {
    /// `theta = float("inf")` selects the comonotone model.
    #[new]
    #[pyo3(signature = (n, beta, theta = 1.0))]
    fn new(n: usize, beta: f64, theta: f64) -> PyResult<Self> {
        Ok(Self { inner: rarecc_core::LightTailModel::new(n, beta, theta).map_err(to_py)? })
    }

    #[pyo3(name = "lambda_")]
    fn lambda(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.lambda(&x).map_err(to_py)
    }

    fn qinv(&self, u: f64) -> f64 {
        self.inner.qinv(u)
    }

    fn sample(&self, seed: u64, count: usize) -> PyResult<Vec<Vec<f64>>> {
        sample_rows(&self.inner.clone().into(), seed, count)
    }
}

#[pyclass(name = "HeavyTailModel", module = "rarecc", frozen)]
struct PyHeavy {
    inner: rarecc_core::HeavyTailModel,
}

#[pymethods]
impl PyHeavy {
    /// `atoms` is a list of `(weight, point)` pairs.
    #[new]
    #[pyo3(signature = (alpha, atoms = None))]
    fn new(alpha: f64, atoms: Option<Vec<(f64, Vec<f64>)>>) -> PyResult<Self> {
        let inner = match atoms {
            None => rarecc_core::HeavyTailModel::pareto(alpha),
            Some(a) => rarecc_core::HeavyTailModel::new(
                alpha,
                a.into_iter().map(|(weight, point)| Atom { weight, point }).collect(),
            ),
        }
        .map_err(to_py)?;
        Ok(Self { inner })
    }

    fn fbar_inv(&self, delta: f64) -> PyResult<f64> {
        self.inner.fbar_inv(delta).map_err(to_py)
    }

    fn sample(&self, seed: u64, count: usize) -> PyResult<Vec<Vec<f64>>> {
        sample_rows(&self.inner.clone().into(), seed, count)
    }
}

fn sample_rows(tail: &TailModel, seed: u64, count: usize) -> PyResult<Vec<Vec<f64>>> {
    let batch = tail.sample(seed, count).map_err(to_py)?;
    Ok(batch.rows().map(|r| r.to_vec()).collect())
}

fn tail_of(obj: &Bound<'_, PyAny>) -> PyResult<TailModel> {
    if let Ok(m) = obj.cast::<PyLight>() {
        return Ok(m.get().inner.clone().into());
    }
    if let Ok(m) = obj.cast::<PyHeavy>() {
        return Ok(m.get().inner.clone().into());
    }
    Err(PyValueError::new_err("expected a LightTailModel or HeavyTailModel"))
}

fn limit_dict<'py>(py: Python<'py>, s: &LimitSolution) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("y_star", s.y_star.clone())?;
    d.set_item("value", s.value)?;
    d.set_item("residual", s.residual)?;
    d.set_item(
        "method",
        match s.method {
            limits::LimitMethod::ClosedForm => "closed-form",
            limits::LimitMethod::RaySearch => "ray-search",
        },
    )?;
    Ok(d)
}

fn method_dict<'py>(py: Python<'py>, r: &MethodResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    let name = match r.method {
        methods::MethodKind::CcpOracle => "ccp-oracle",
        methods::MethodKind::Cvar => "cvar",
        methods::MethodKind::Scenario => "scenario",
    };
    d.set_item("method", name)?;
    d.set_item("x", r.x.clone())?;
    d.set_item("value", r.value)?;
    d.set_item("delta", r.delta)?;
    d.set_item("violation", r.violation)?;
    d.set_item("violation_halfwidth", r.violation_halfwidth)?;
    d.set_item("seed", r.seed)?;
    Ok(d)
}

/// `I(b)`; `inf` when `b = 0`.
#[pyfunction]
#[pyo3(signature = (model, b, numeric = false))]
fn rate_i(model: &Bound<'_, PyLight>, b: Vec<f64>, numeric: bool) -> PyResult<f64> {
    let m = model.get().inner.clone();
    let rf = if numeric { RateFunction::numeric(m) } else { RateFunction::new(m) };
    Ok(match rf.rate_i(&b).map_err(to_py)? {
        Rate::Finite(v) => v,
        Rate::Infeasible => f64::INFINITY,
    })
}

#[pyfunction]
fn solve_lt_limit<'py>(
    py: Python<'py>,
    model: &Bound<'py, PyLight>,
    problem: &Bound<'py, PyProblem>,
) -> PyResult<Bound<'py, PyDict>> {
    let rf = RateFunction::new(model.get().inner.clone());
    let s = limits::solve_lt_limit(&rf, &problem.get().inner).map_err(to_py)?;
    limit_dict(py, &s)
}

#[pyfunction]
fn solve_ht_limit<'py>(
    py: Python<'py>,
    model: &Bound<'py, PyHeavy>,
    problem: &Bound<'py, PyProblem>,
) -> PyResult<Bound<'py, PyDict>> {
    let s = limits::solve_ht_limit(&model.get().inner, &problem.get().inner).map_err(to_py)?;
    limit_dict(py, &s)
}

#[pyfunction]
fn ccp_oracle<'py>(
    py: Python<'py>,
    problem: &Bound<'py, PyProblem>,
    tail: &Bound<'py, PyAny>,
    delta: f64,
    budget: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let r = methods::ccp_oracle(&problem.get().inner, &tail_of(tail)?, delta, budget, seed).map_err(to_py)?;
    method_dict(py, &r)
}

#[pyfunction]
fn cvar_solve<'py>(
    py: Python<'py>,
    problem: &Bound<'py, PyProblem>,
    tail: &Bound<'py, PyAny>,
    delta: f64,
    sample_count: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let (r, _) = methods::cvar_solve(&problem.get().inner, &tail_of(tail)?, delta, sample_count, seed).map_err(to_py)?;
    method_dict(py, &r)
}

/// Scenario program on explicit draws; returns `y`, `value` and the decision `x = y / radius`.
#[pyfunction]
#[pyo3(signature = (problem, samples, radius = 1.0))]
fn scenario_solve<'py>(
    py: Python<'py>,
    problem: &Bound<'py, PyProblem>,
    samples: Vec<Vec<f64>>,
    radius: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let batch = SampleBatch::from_rows(&samples, 0).map_err(to_py)?;
    let s = methods::scenario_solve(&problem.get().inner, &batch, radius).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("x", s.decision())?;
    d.set_item("y", s.y)?;
    d.set_item("value", s.value)?;
    d.set_item("radius", s.radius)?;
    Ok(d)
}

/// Returns `(estimate, wilson_half_width)`.
#[pyfunction]
fn violation_prob(
    problem: &Bound<'_, PyProblem>,
    x: Vec<f64>,
    tail: &Bound<'_, PyAny>,
    budget: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let e = methods::violation_prob(&problem.get().inner, &x, &tail_of(tail)?, budget, seed).map_err(to_py)?;
    Ok((e.estimate, e.half_width))
}

#[pyfunction]
fn sample_size_rule(delta: f64, beta_conf: f64, dim: usize) -> PyResult<u64> {
    methods::sample_size_rule(delta, beta_conf, dim).map_err(to_py)
}

/// `max c^T x s.t. rows x <= rhs, lo <= x <= hi`; `hi` may be `inf`.
#[pyfunction]
fn solve_lp<'py>(
    py: Python<'py>,
    c: Vec<f64>,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    bounds: Vec<(f64, f64)>,
) -> PyResult<Bound<'py, PyDict>> {
    let lp = LinearProgram::new(c, rows, rhs, bounds).map_err(to_py)?;
    let s = lpsolve::solve_lp(&lp).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("status", if s.status == LpStatus::Optimal { "optimal" } else { "infeasible" })?;
    d.set_item("x", s.x)?;
    d.set_item("objective", s.objective)?;
    d.set_item("iterations", s.iterations)?;
    Ok(d)
}

/// Runs the experiment described by a JSON configuration and returns the CSV report.
#[pyfunction]
#[pyo3(signature = (config_json, seed = None))]
fn run_experiment(config_json: &str, seed: Option<u64>) -> PyResult<String> {
    let mut cfg = ExperimentConfig::from_json(config_json).map_err(to_py)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    let rows = run_rows(&cfg).map_err(to_py)?;
    let mut out = Vec::new();
    write_csv(&rows, &mut out).map_err(to_py)?;
    String::from_utf8(out).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn rarecc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PyLight>()?;
    m.add_class::<PyHeavy>()?;
    m.add_function(wrap_pyfunction!(rate_i, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lt_limit, m)?)?;
    m.add_function(wrap_pyfunction!(solve_ht_limit, m)?)?;
    m.add_function(wrap_pyfunction!(ccp_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(cvar_solve, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_solve, m)?)?;
    m.add_function(wrap_pyfunction!(violation_prob, m)?)?;
    m.add_function(wrap_pyfunction!(sample_size_rule, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lp, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
