//! Python bindings: parameters, right-hand side, spectral search, Galerkin
//! solves, the constructed solution pair and its certificate.

use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use dyadic::construction::SplitFields;
use dyadic::model::{self, ForcingSample, ShellVector};
use dyadic::solver::{self, Forcing, SolveConfig};
use dyadic::spectral;
use dyadic::verify::{self, Tolerances, UniquenessSetup};

create_exception!(dyadic_py, NumericError, PyRuntimeError);

fn to_py(e: dyadic::DyadicError) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        _ => NumericError::new_err(e.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    use serde_json::Value;
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match (n.as_i64(), n.as_f64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any(),
            (None, Some(f)) => f.into_pyobject(py)?.into_any(),
            _ => py.None().into_bound(py),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(a) => {
            let items = a
                .iter()
                .map(|x| json_to_py(py, x))
                .collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        Value::Object(o) => {
            let d = PyDict::new(py);
            for (k, x) in o {
                d.set_item(k, json_to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn serialize<'py, T: serde::Serialize>(py: Python<'py>, x: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(x).map_err(|e| NumericError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

/// Model constants `lambda`, `beta`, `N`, `R` and `T`.
#[pyclass(name = "Params", frozen, from_py_object)]
#[derive(Clone)]
struct PyParams {
    inner: dyadic::Params,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (lam, beta, n_shells, rho_threshold=None, horizon=None))]
    fn new(
        lam: f64,
        beta: f64,
        n_shells: usize,
        rho_threshold: Option<f64>,
        horizon: Option<f64>,
    ) -> PyResult<Self> {
        let mut p = dyadic::Params::new(lam, beta, n_shells).map_err(to_py)?;
        if let Some(r) = rho_threshold {
            p = p.with_rho_threshold(r).map_err(to_py)?;
        }
        if let Some(t) = horizon {
            p = p.with_horizon(t).map_err(to_py)?;
        }
        Ok(PyParams { inner: p })
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn n_shells(&self) -> usize {
        self.inner.n_shells
    }

    #[getter]
    fn rho_threshold(&self) -> f64 {
        self.inner.rho_threshold
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "Params(lam={}, beta={}, n_shells={}, rho_threshold={}, horizon={})",
            p.lambda, p.beta, p.n_shells, p.rho_threshold, p.horizon
        )
    }
}

/// `du/dt` of the truncated system.
#[pyfunction]
fn shell_rhs(u: Vec<f64>, f: Vec<f64>, params: &PyParams) -> PyResult<Vec<f64>> {
    model::shell_rhs(&ShellVector(u), &ForcingSample(f), &params.inner)
        .map(|r| r.0)
        .map_err(to_py)
}

/// `sum_n u_n B(u, u)_n`, zero up to roundoff.
#[pyfunction]
fn nonlinear_energy_flux(u: Vec<f64>, params: &PyParams) -> PyResult<f64> {
    model::nonlinear_energy_flux(&ShellVector(u), &params.inner).map_err(to_py)
}

/// Spectral report; searches the `q` grid unless `q` is given.
#[pyfunction]
#[pyo3(signature = (params, q=None))]
fn spectrum<'py>(py: Python<'py>, params: &PyParams, q: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
    let p = &params.inner;
    let r = py
        .detach(|| match q {
            Some(q) => spectral::evaluate_q(q, p, p.rho_threshold),
            None => spectral::find_q(p, p.rho_threshold),
        })
        .map_err(to_py)?;
    serialize(py, &r)
}

fn parse_forcing(forcing: &Bound<'_, PyAny>) -> PyResult<Forcing> {
    if forcing.is_none() {
        return Ok(Forcing::Zero);
    }
    if let Ok(v) = forcing.extract::<Vec<f64>>() {
        return Ok(Forcing::PerShell(v));
    }
    if let Ok(c) = forcing.extract::<f64>() {
        return Ok(Forcing::Constant(c));
    }
    if let Ok(s) = forcing.extract::<String>() {
        if s == "zero" {
            return Ok(Forcing::Zero);
        }
        if let Some(c) = s.strip_prefix("constant:").and_then(|c| c.parse::<f64>().ok()) {
            return Ok(Forcing::Constant(c));
        }
    }
    Err(PyValueError::new_err(
        "forcing must be None, 'zero', 'constant:<c>', a number (shell 1) or a list per shell",
    ))
}

/// Galerkin solve. Returns `(t, u)` with `u[i][n-1]` the shell-n value at `t[i]`.
#[pyfunction]
#[pyo3(signature = (params, initial, t_end, forcing=None, rtol=1e-10, atol=1e-12, grid=None))]
fn solve(
    py: Python<'_>,
    params: &PyParams,
    initial: Vec<f64>,
    t_end: f64,
    forcing: Option<Bound<'_, PyAny>>,
    rtol: f64,
    atol: f64,
    grid: Option<Vec<f64>>,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let forcing = match forcing {
        Some(f) => parse_forcing(&f)?,
        None => Forcing::Zero,
    };
    let mut cfg = SolveConfig::new(initial.len(), t_end, ShellVector(initial), forcing)
        .with_tolerances(rtol, atol);
    if let Some(g) = grid {
        cfg = cfg.with_output(g);
    }
    let p = params.inner;
    let traj = py
        .detach(|| solver::galerkin_solve(&cfg, &p))
        .map_err(to_py)?;
    Ok((traj.grid, traj.states.into_iter().map(|s| s.0).collect()))
}

/// The constructed pair `u = v + g` and `u = v - g` with their common forcing.
#[pyclass(name = "Construction", frozen)]
struct PyConstruction {
    fields: Arc<SplitFields>,
    spectral: spectral::SpectralReport,
    calibration: dyadic::profiles::Calibration,
}

#[pymethods]
impl PyConstruction {
    #[new]
    fn new(py: Python<'_>, params: &PyParams) -> PyResult<Self> {
        let p = params.inner;
        let c = py
            .detach(|| verify::build_construction(&p, &Tolerances::default()))
            .map_err(to_py)?;
        Ok(PyConstruction {
            fields: Arc::new(c.fields),
            spectral: c.spectral,
            calibration: c.calibration,
        })
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.calibration.rho
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.calibration.eps
    }

    #[getter]
    fn q(&self) -> f64 {
        self.spectral.q
    }

    /// Shell times `t_n = T lambda^(-2n)`.
    fn shell_time(&self, n: i64) -> f64 {
        self.fields.grid.at(n)
    }

    fn v(&self, n: usize, t: f64) -> PyResult<f64> {
        self.fields.eval_v(n, t).map_err(to_py)
    }

    fn g(&self, n: usize, t: f64) -> PyResult<f64> {
        self.fields.eval_g(n, t).map_err(to_py)
    }

    /// `u_n(t)` for `sign = +1` or `-1`.
    fn u(&self, n: usize, t: f64, sign: f64) -> PyResult<f64> {
        self.fields.eval_u(n, t, sign).map_err(to_py)
    }

    fn forcing(&self, n: usize, t: f64) -> PyResult<f64> {
        self.fields.eval_f(n, t).map_err(to_py)
    }

    fn spectral_report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        serialize(py, &self.spectral)
    }

    fn calibration_report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        serialize(py, &self.calibration)
    }

    /// Galerkin solve of the `n_shells` truncation driven by the constructed forcing.
    #[pyo3(signature = (n_shells, rtol=1e-10, atol=1e-12))]
    fn galerkin(
        &self,
        py: Python<'_>,
        n_shells: usize,
        rtol: f64,
        atol: f64,
    ) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        let mut p = self.fields.params;
        p.n_shells = n_shells;
        let cfg = SolveConfig::new(
            n_shells,
            p.horizon,
            ShellVector::zeros(n_shells),
            Forcing::Constructed(self.fields.clone()),
        )
        .with_tolerances(rtol, atol);
        let traj = py
            .detach(|| solver::galerkin_solve(&cfg, &p))
            .map_err(to_py)?;
        Ok((traj.grid, traj.states.into_iter().map(|s| s.0).collect()))
    }
}

/// Full certificate as a dict (metadata included).
#[pyfunction]
#[pyo3(signature = (params, tol_residual=1e-6, tol_gluing=1e-8, tol_energy=1e-6))]
fn certify<'py>(
    py: Python<'py>,
    params: &PyParams,
    tol_residual: f64,
    tol_gluing: f64,
    tol_energy: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let tol = Tolerances {
        residual: tol_residual,
        gluing: tol_gluing,
        energy: tol_energy,
        ..Tolerances::default()
    };
    let p = params.inner;
    let cert = py
        .detach(|| verify::certify_nonuniqueness(&p, &tol))
        .map_err(to_py)?;
    serialize(py, &cert)
}

/// Resolution and perturbation study in the regime `beta <= 2`.
#[pyfunction]
fn uniqueness<'py>(py: Python<'py>, params: &PyParams) -> PyResult<Bound<'py, PyAny>> {
    let p = params.inner;
    let r = py
        .detach(|| verify::uniqueness_experiment(&p, &UniquenessSetup::standard(&p)))
        .map_err(to_py)?;
    serialize(py, &r)
}

#[pymodule]
fn dyadic_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyConstruction>()?;
    m.add_function(wrap_pyfunction!(shell_rhs, m)?)?;
    m.add_function(wrap_pyfunction!(nonlinear_energy_flux, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(uniqueness, m)?)?;
    m.add("NumericError", m.py().get_type::<NumericError>())?;
    Ok(())
}
