//! Python bindings: `import kg_spectra`.
//!
//! Reports cross the boundary as plain dicts and lists. Bad input raises
//! `ValueError`; a solve that does not converge raises `NonConvergenceError`.

use std::cell::RefCell;

use kg_spectra::analysis::{self, AnalysisError};
use kg_spectra::continuation::{self, ContinuationError, RootWindow};
use kg_spectra::eigensolve::{self, EigenResult, SolveError, SolverConfig};
use kg_spectra::potentials::{PotentialError, PotentialFamily};
use kg_spectra::radial::{GridLayout, Parity, RadialError, RadialProblem};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

create_exception!(kg_spectra, NonConvergenceError, PyRuntimeError);

fn potential_err(e: PotentialError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn radial_err(e: RadialError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn solve_err(e: SolveError) -> PyErr {
    match e {
        SolveError::Inadmissible(_) | SolveError::Config(_) | SolveError::Radial(_) | SolveError::Potential(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => NonConvergenceError::new_err(other.to_string()),
    }
}

fn analysis_err(e: AnalysisError) -> PyErr {
    match e {
        AnalysisError::Solve(s) => solve_err(s),
        AnalysisError::Potential(p) => potential_err(p),
        AnalysisError::Incompatible(_) | AnalysisError::InvalidStep(_) | AnalysisError::NonFinite(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => NonConvergenceError::new_err(other.to_string()),
    }
}

fn continuation_err(e: ContinuationError) -> PyErr {
    match e {
        ContinuationError::Solve(s) => solve_err(s),
        ContinuationError::Potential(p) => potential_err(p),
        ContinuationError::BadParameterGrid
        | ContinuationError::EnergyOutsideWindow { .. }
        | ContinuationError::BadBracket(..) => PyValueError::new_err(e.to_string()),
        other => NonConvergenceError::new_err(other.to_string()),
    }
}

/// Serializable report to native Python objects.
fn to_python<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A potential family, e.g. `Potential("cutoff-coulomb:v=0.5,a=1")`.
#[pyclass(name = "Potential", module = "kg_spectra", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPotential {
    inner: PotentialFamily,
}

#[pymethods]
impl PyPotential {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        PotentialFamily::parse(spec).map(|inner| Self { inner }).map_err(potential_err)
    }

    fn __call__(&self, r: f64) -> PyResult<f64> {
        self.inner.eval(r).map_err(potential_err)
    }

    /// Parameter derivative `∂V/∂a` of the sweep parameter at `r`.
    fn param_derivative(&self, r: f64) -> PyResult<f64> {
        self.inner.eval_param_derivative(r).map_err(potential_err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().name()
    }

    #[getter]
    fn params(&self) -> Vec<(&'static str, f64)> {
        self.inner.params().collect()
    }

    #[getter]
    fn sweep_param(&self) -> Option<String> {
        self.inner.sweep_param().map(str::to_string)
    }

    fn with_sweep(&self, name: &str) -> PyResult<Self> {
        self.inner.clone().with_sweep(name).map(|inner| Self { inner }).map_err(potential_err)
    }

    fn with_param(&self, name: &str, value: f64) -> PyResult<Self> {
        self.inner.with_param(name, value).map(|inner| Self { inner }).map_err(potential_err)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Potential('{}')", self.inner)
    }
}

fn family_of(obj: &Bound<'_, PyAny>) -> PyResult<PotentialFamily> {
    if let Ok(p) = obj.extract::<PyRef<'_, PyPotential>>() {
        return Ok(p.inner.clone());
    }
    match obj.extract::<String>() {
        Ok(spec) => PotentialFamily::parse(&spec).map_err(potential_err),
        Err(_) => Err(PyValueError::new_err("expected a Potential or a potential spec string")),
    }
}

/// Solver settings. Keyword-only constructor with the library defaults.
#[pyclass(name = "SolverConfig", module = "kg_spectra", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySolverConfig {
    inner: SolverConfig,
}

#[pymethods]
impl PySolverConfig {
    #[new]
    #[pyo3(signature = (*, e_scan_points=400, e_tol=1e-10, max_bisections=200, n_points=4000, r_min=1e-6, r_max=None, layout=None, normalize_tol=1e-8))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        e_scan_points: usize,
        e_tol: f64,
        max_bisections: usize,
        n_points: usize,
        r_min: f64,
        r_max: Option<f64>,
        layout: Option<&str>,
        normalize_tol: f64,
    ) -> PyResult<Self> {
        let mut inner = SolverConfig { e_scan_points, e_tol, max_bisections, normalize_tol, ..Default::default() };
        inner.grid.n_points = n_points;
        inner.grid.r_min = r_min;
        inner.grid.r_max = r_max;
        inner.grid.layout = match layout {
            None => None,
            Some("uniform") => Some(GridLayout::Uniform),
            Some("log-uniform") => Some(GridLayout::LogUniform),
            Some(other) => return Err(PyValueError::new_err(format!("unknown layout `{other}`"))),
        };
        inner.validate().map_err(solve_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn e_scan_points(&self) -> usize {
        self.inner.e_scan_points
    }

    #[getter]
    fn e_tol(&self) -> f64 {
        self.inner.e_tol
    }

    #[getter]
    fn n_points(&self) -> usize {
        self.inner.grid.n_points
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_python(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("SolverConfig({})", serde_json::to_string(&self.inner).unwrap_or_default())
    }
}

fn config_of(config: Option<PyRef<'_, PySolverConfig>>) -> SolverConfig {
    config.map(|c| c.inner).unwrap_or_default()
}

/// One channel: `Problem(potential, d=3, l=0)` or `Problem(potential, d=1, parity="even")`.
#[pyclass(name = "Problem", module = "kg_spectra", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyProblem {
    inner: RadialProblem,
}

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (potential, d=3, l=None, parity=None, m=1.0))]
    fn new(potential: &Bound<'_, PyAny>, d: u32, l: Option<u32>, parity: Option<&str>, m: f64) -> PyResult<Self> {
        let family = family_of(potential)?;
        let inner = if d == 1 {
            if l.is_some() {
                return Err(PyValueError::new_err("l applies to d >= 2; use parity for d = 1"));
            }
            let parity: Parity = parity.unwrap_or("even").parse().map_err(PyValueError::new_err)?;
            RadialProblem::one_dimensional(parity, m, family)
        } else {
            if parity.is_some() {
                return Err(PyValueError::new_err("parity applies to d = 1; use l for d >= 2"));
            }
            RadialProblem::new(d, l.unwrap_or(0), m, family)
        }
        .map_err(radial_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn d(&self) -> u32 {
        self.inner.dim()
    }

    #[getter]
    fn l(&self) -> Option<u32> {
        self.inner.ell()
    }

    #[getter]
    fn parity(&self) -> Option<String> {
        self.inner.parity().map(|p| p.to_string())
    }

    #[getter]
    fn m(&self) -> f64 {
        self.inner.mass()
    }

    #[getter]
    fn potential(&self) -> PyPotential {
        PyPotential { inner: self.inner.family().clone() }
    }

    /// Angular constant `Q` of the radial equation.
    #[getter]
    fn q(&self) -> f64 {
        self.inner.q()
    }

    fn __repr__(&self) -> String {
        let channel = match (self.inner.ell(), self.inner.parity()) {
            (Some(l), _) => format!("l={l}"),
            (None, Some(p)) => format!("parity='{p}'"),
            (None, None) => String::new(),
        };
        format!("Problem('{}', d={}, {channel}, m={})", self.inner.family(), self.inner.dim(), self.inner.mass())
    }
}

/// A converged, normalized bound state.
#[pyclass(name = "EigenState", module = "kg_spectra", frozen)]
struct PyEigenState {
    inner: EigenResult,
}

#[pymethods]
impl PyEigenState {
    #[getter]
    fn energy(&self) -> f64 {
        self.inner.energy
    }

    #[getter]
    fn nodes(&self) -> usize {
        self.inner.nodes
    }

    #[getter]
    fn norm_error(&self) -> f64 {
        self.inner.norm_error
    }

    #[getter]
    fn mismatch_residual(&self) -> f64 {
        self.inner.mismatch_residual
    }

    #[getter]
    fn ambiguous(&self) -> bool {
        self.inner.ambiguous
    }

    #[getter]
    fn radii(&self) -> Vec<f64> {
        self.inner.radii()
    }

    #[getter]
    fn psi(&self) -> Vec<f64> {
        self.inner.psi.clone()
    }

    #[getter]
    fn problem(&self) -> PyProblem {
        PyProblem { inner: self.inner.problem.clone() }
    }

    fn __repr__(&self) -> String {
        format!("EigenState(energy={}, nodes={})", self.inner.energy, self.inner.nodes)
    }
}

#[pyfunction]
#[pyo3(signature = (problem, n=0, config=None))]
fn find_state(
    py: Python<'_>,
    problem: PyRef<'_, PyProblem>,
    n: usize,
    config: Option<PyRef<'_, PySolverConfig>>,
) -> PyResult<PyEigenState> {
    let (p, cfg) = (problem.inner.clone(), config_of(config));
    py.detach(|| eigensolve::find_state(&p, n, &cfg)).map(|inner| PyEigenState { inner }).map_err(solve_err)
}

/// Both sides of the ordering identity for two states of one channel.
#[pyfunction]
fn comparison_identity<'py>(
    py: Python<'py>,
    a: PyRef<'_, PyEigenState>,
    b: PyRef<'_, PyEigenState>,
) -> PyResult<Bound<'py, PyAny>> {
    let report = analysis::comparison_identity(&a.inner, &b.inner).map_err(analysis_err)?;
    to_python(py, &report)
}

/// `∫ f(r) ψ(r)² dr` for a Python callable `f`.
#[pyfunction]
fn expectation(state: PyRef<'_, PyEigenState>, f: &Bound<'_, PyAny>) -> PyResult<f64> {
    let failure: RefCell<Option<PyErr>> = RefCell::new(None);
    let value = analysis::expectation(&state.inner, |r| {
        if failure.borrow().is_some() {
            return f64::NAN;
        }
        match f.call1((r,)).and_then(|v| v.extract::<f64>().map_err(PyErr::from)) {
            Ok(x) => x,
            Err(e) => {
                *failure.borrow_mut() = Some(e);
                f64::NAN
            }
        }
    });
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    value.map_err(analysis_err)
}

/// `E'(a)` from expectation values plus its finite-difference check.
#[pyfunction]
fn hf_derivative<'py>(
    py: Python<'py>,
    state: PyRef<'_, PyEigenState>,
    potential: &Bound<'_, PyAny>,
) -> PyResult<Bound<'py, PyAny>> {
    let family = family_of(potential)?;
    let res = state.inner.clone();
    let report = py.detach(|| analysis::hf_derivative(&res, &family)).map_err(analysis_err)?;
    to_python(py, &report)
}

#[pyfunction]
#[pyo3(signature = (problem, h, n=0, config=None))]
fn fd_derivative(
    py: Python<'_>,
    problem: PyRef<'_, PyProblem>,
    h: f64,
    n: usize,
    config: Option<PyRef<'_, PySolverConfig>>,
) -> PyResult<f64> {
    let (p, cfg) = (problem.inner.clone(), config_of(config));
    py.detach(|| analysis::fd_derivative(&p, n, h, &cfg)).map_err(analysis_err)
}

#[pyfunction]
#[pyo3(signature = (spec1, spec2, problem, config=None))]
fn check_theorem1<'py>(
    py: Python<'py>,
    spec1: &str,
    spec2: &str,
    problem: PyRef<'_, PyProblem>,
    config: Option<PyRef<'_, PySolverConfig>>,
) -> PyResult<Bound<'py, PyAny>> {
    let (p, cfg) = (problem.inner.clone(), config_of(config));
    let report = py.detach(|| analysis::check_theorem1(spec1, spec2, &p, &cfg)).map_err(analysis_err)?;
    to_python(py, &report)
}

#[pyfunction]
#[pyo3(signature = (potential, problem, a_values, n=0, config=None))]
fn check_theorem2<'py>(
    py: Python<'py>,
    potential: &Bound<'_, PyAny>,
    problem: PyRef<'_, PyProblem>,
    a_values: Vec<f64>,
    n: usize,
    config: Option<PyRef<'_, PySolverConfig>>,
) -> PyResult<Bound<'py, PyAny>> {
    let family = family_of(potential)?;
    let (p, cfg) = (problem.inner.clone(), config_of(config));
    let report = py.detach(|| analysis::check_theorem2(&family, &p, n, &a_values, &cfg)).map_err(analysis_err)?;
    to_python(py, &report)
}

#[pyfunction]
#[pyo3(signature = (potential, problem, a_values, n=0, config=None))]
fn sweep_parameter<'py>(
    py: Python<'py>,
    potential: &Bound<'_, PyAny>,
    problem: PyRef<'_, PyProblem>,
    a_values: Vec<f64>,
    n: usize,
    config: Option<PyRef<'_, PySolverConfig>>,
) -> PyResult<Bound<'py, PyAny>> {
    let family = family_of(potential)?;
    let (p, cfg) = (problem.inner.clone(), config_of(config));
    let curve =
        py.detach(|| continuation::sweep_parameter(&family, &p, n, &a_values, &cfg)).map_err(continuation_err)?;
    to_python(py, &curve)
}

#[pyfunction]
#[pyo3(signature = (potential, problem, energy, a_lo, a_hi, n=0, config=None))]
#[allow(clippy::too_many_arguments)]
fn solve_for_parameter(
    py: Python<'_>,
    potential: &Bound<'_, PyAny>,
    problem: PyRef<'_, PyProblem>,
    energy: f64,
    a_lo: f64,
    a_hi: f64,
    n: usize,
    config: Option<PyRef<'_, PySolverConfig>>,
) -> PyResult<f64> {
    let family = family_of(potential)?;
    let (p, cfg) = (problem.inner.clone(), config_of(config));
    py.detach(|| continuation::solve_for_parameter(&family, &p, n, energy, (a_lo, a_hi), &cfg))
        .map_err(continuation_err)
}

#[pyfunction]
#[pyo3(signature = (potential, problem, energies, n=0, config=None))]
fn trace_folded_curve<'py>(
    py: Python<'py>,
    potential: &Bound<'_, PyAny>,
    problem: PyRef<'_, PyProblem>,
    energies: Vec<f64>,
    n: usize,
    config: Option<PyRef<'_, PySolverConfig>>,
) -> PyResult<Bound<'py, PyAny>> {
    let family = family_of(potential)?;
    let (p, cfg) = (problem.inner.clone(), config_of(config));
    let curve = py
        .detach(|| continuation::trace_folded_curve(&family, &p, n, &energies, &RootWindow::default(), &cfg))
        .map_err(continuation_err)?;
    to_python(py, &curve)
}

#[pymodule]
#[pyo3(name = "kg_spectra")]
fn kg_spectra_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NonConvergenceError", m.py().get_type::<NonConvergenceError>())?;
    m.add_class::<PyPotential>()?;
    m.add_class::<PySolverConfig>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PyEigenState>()?;
    m.add_function(wrap_pyfunction!(find_state, m)?)?;
    m.add_function(wrap_pyfunction!(comparison_identity, m)?)?;
    m.add_function(wrap_pyfunction!(expectation, m)?)?;
    m.add_function(wrap_pyfunction!(hf_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(fd_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(check_theorem1, m)?)?;
    m.add_function(wrap_pyfunction!(check_theorem2, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_parameter, m)?)?;
    m.add_function(wrap_pyfunction!(solve_for_parameter, m)?)?;
    m.add_function(wrap_pyfunction!(trace_folded_curve, m)?)?;
    Ok(())
}
