//! Python bindings: reservoir coefficients, Bloch dynamics, the sweep solver
//! and spectra, with plain lists and tuples at the boundary.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ::tcl::{analysis, reservoir, special, Error};
use ::tcl::{
    BlochVector, CoefficientMethod, CoefficientTrace, ControlField, CostWeights, SweepConfig, TimeGrid,
};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Parse { .. } | Error::Validation(_) | Error::InvalidParameter(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn method(name: &str) -> PyResult<CoefficientMethod> {
    name.parse().map_err(py_err)
}

fn vector(x: (f64, f64, f64)) -> BlochVector {
    BlochVector::new(x.0, x.1, x.2)
}

fn triples(states: &[BlochVector]) -> Vec<(f64, f64, f64)> {
    states.iter().map(|s| (s.x1, s.x2, s.x3)).collect()
}

/// Bath parameters (units with ħ = k_B = 1).
#[pyclass(frozen, module = "tcl_control")]
struct ReservoirParams {
    inner: reservoir::ReservoirParams,
}

#[pymethods]
impl ReservoirParams {
    #[new]
    #[pyo3(signature = (alpha2, omega0, r, kbt, gamma0 = 1.0))]
    fn new(alpha2: f64, omega0: f64, r: f64, kbt: f64, gamma0: f64) -> PyResult<Self> {
        let inner = reservoir::ReservoirParams::new(alpha2, omega0, r, kbt)
            .and_then(|p| p.with_gamma0(gamma0))
            .map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn alpha2(&self) -> f64 {
        self.inner.alpha2
    }
    #[getter]
    fn omega0(&self) -> f64 {
        self.inner.omega0
    }
    #[getter]
    fn r(&self) -> f64 {
        self.inner.r
    }
    #[getter]
    fn kbt(&self) -> f64 {
        self.inner.kbt
    }
    #[getter]
    fn gamma0(&self) -> f64 {
        self.inner.gamma0
    }
    #[getter]
    fn omega_c(&self) -> f64 {
        self.inner.omega_c()
    }
    #[getter]
    fn nu1(&self) -> f64 {
        self.inner.nu1()
    }
    #[getter]
    fn r0(&self) -> f64 {
        self.inner.r0()
    }
    #[getter]
    fn rc(&self) -> f64 {
        self.inner.rc()
    }

    /// `(gamma_M, delta_M, delta_M_high_t)`.
    fn markovian_limits(&self) -> (f64, f64, f64) {
        let m = reservoir::markovian_limits(&self.inner);
        (m.gamma_m, m.delta_m, m.delta_m_high_t)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ReservoirParams(alpha2={}, omega0={}, r={}, kbt={}, gamma0={})",
            p.alpha2, p.omega0, p.r, p.kbt, p.gamma0
        )
    }
}

#[pyfunction]
#[pyo3(signature = (a, b, c, z, tol = special::DEFAULT_TOL))]
fn hyp2f1(a: Complex64, b: Complex64, c: Complex64, z: Complex64, tol: f64) -> PyResult<Complex64> {
    special::hyp2f1(a, b, c, z, tol).map(|v| v.value).map_err(py_err)
}

#[pyfunction]
fn spectral_density(omega: f64, params: &ReservoirParams) -> f64 {
    reservoir::spectral_density(omega, &params.inner)
}

#[pyfunction]
fn gamma_exact(t: f64, params: &ReservoirParams) -> f64 {
    reservoir::gamma_exact(t, &params.inner)
}

#[pyfunction]
#[pyo3(signature = (t, params, tol = special::DEFAULT_TOL))]
fn delta_exact(t: f64, params: &ReservoirParams, tol: f64) -> PyResult<f64> {
    reservoir::delta_exact(t, &params.inner, tol).map_err(py_err)
}

#[pyfunction]
fn delta_high_t(t: f64, params: &ReservoirParams) -> f64 {
    reservoir::delta_high_t(t, &params.inner)
}

fn trace(params: &ReservoirParams, tf: f64, n_steps: usize, method_name: &str) -> PyResult<CoefficientTrace> {
    let grid = TimeGrid::new(0.0, tf, n_steps).map_err(py_err)?;
    ::tcl::coefficient_trace(&grid, &params.inner, method(method_name)?).map_err(py_err)
}

/// `(t, delta, gamma)` sampled on `n_steps + 1` points of `[0, tf]`.
#[pyfunction]
#[pyo3(signature = (params, tf, n_steps, method = "exact"))]
fn coefficient_trace(
    params: &ReservoirParams,
    tf: f64,
    n_steps: usize,
    method: &str,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let tr = trace(params, tf, n_steps, method)?;
    Ok((tr.grid.times(), tr.delta, tr.gamma))
}

/// Bloch trajectory under the control `(ux, uy)` (zero when omitted).
#[pyfunction]
#[pyo3(signature = (params, x0, tf, n_steps, method = "exact", ux = None, uy = None))]
#[allow(clippy::too_many_arguments)]
fn evolve(
    params: &ReservoirParams,
    x0: (f64, f64, f64),
    tf: f64,
    n_steps: usize,
    method: &str,
    ux: Option<Vec<f64>>,
    uy: Option<Vec<f64>>,
) -> PyResult<Vec<(f64, f64, f64)>> {
    let coeffs = trace(params, tf, n_steps, method)?;
    let grid = coeffs.grid;
    let control = match (ux, uy) {
        (None, None) => ControlField::zeros(grid),
        (ux, uy) => ControlField::new(
            grid,
            ux.unwrap_or_else(|| vec![0.0; grid.len()]),
            uy.unwrap_or_else(|| vec![0.0; grid.len()]),
        )
        .map_err(py_err)?,
    };
    let traj = ::tcl::integrate(&vector(x0), &control, &coeffs).map_err(py_err)?;
    Ok(triples(&traj.states))
}

/// Forward-backward sweep. Returns a dict with the control, state, costate,
/// cost history, stationarity residual and convergence flag.
#[pyfunction]
#[pyo3(signature = (
    params, x0, tf, n_steps, method = "exact", theta = 1.0,
    relaxation = 0.3, max_iters = 3000, tol_cost = 1e-10, tol_control = 1e-5
))]
#[allow(clippy::too_many_arguments)]
fn optimize<'py>(
    py: Python<'py>,
    params: &ReservoirParams,
    x0: (f64, f64, f64),
    tf: f64,
    n_steps: usize,
    method: &str,
    theta: f64,
    relaxation: f64,
    max_iters: usize,
    tol_cost: f64,
    tol_control: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let coeffs = trace(params, tf, n_steps, method)?;
    let weights = CostWeights::new(theta).map_err(py_err)?;
    let config = SweepConfig { relaxation, max_iters, tol_cost, tol_control };
    let x0 = vector(x0);
    let r = py
        .detach(|| ::tcl::solve_fbsm(&x0, &coeffs, &weights, &config))
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("t", coeffs.grid.times())?;
    d.set_item("ux", r.control.ux.clone())?;
    d.set_item("uy", r.control.uy.clone())?;
    d.set_item("state", triples(&r.state.states))?;
    d.set_item("costate", triples(&r.costate.states))?;
    d.set_item("cost_history", r.cost_history.clone())?;
    d.set_item("stationarity_residual", r.stationarity_residual)?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("converged", r.converged)?;
    Ok(d)
}

#[pyfunction]
fn coherence(x: (f64, f64, f64)) -> f64 {
    analysis::coherence(&vector(x))
}

/// `(freqs, power)` of the mean-removed signal.
#[pyfunction]
fn power_spectrum(samples: Vec<f64>, sample_spacing: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let s = analysis::power_spectrum(&samples, sample_spacing).map_err(py_err)?;
    Ok((s.freqs, s.power))
}

#[pyfunction]
#[pyo3(signature = (samples, sample_spacing, energy_fraction = analysis::DEFAULT_ENERGY_FRACTION))]
fn bandwidth(samples: Vec<f64>, sample_spacing: f64, energy_fraction: f64) -> PyResult<f64> {
    let s = analysis::power_spectrum(&samples, sample_spacing).map_err(py_err)?;
    analysis::bandwidth(&s, energy_fraction).map_err(py_err)
}

/// Labels of scenarios parsed from a config text.
#[pyfunction]
fn scenario_labels(text: &str) -> PyResult<Vec<String>> {
    let c = ::tcl::parse_config(text).map_err(py_err)?;
    Ok(c.scenarios.into_iter().map(|s| s.label).collect())
}

#[pymodule]
pub fn tcl_control(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ReservoirParams>()?;
    m.add_function(wrap_pyfunction!(hyp2f1, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_density, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_exact, m)?)?;
    m.add_function(wrap_pyfunction!(delta_exact, m)?)?;
    m.add_function(wrap_pyfunction!(delta_high_t, m)?)?;
    m.add_function(wrap_pyfunction!(coefficient_trace, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(coherence, m)?)?;
    m.add_function(wrap_pyfunction!(power_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(bandwidth, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_labels, m)?)?;
    Ok(())
}
