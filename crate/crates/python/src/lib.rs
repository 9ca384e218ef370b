//! Python bindings for the photoacoustic reconstruction toolkit.
//!
//! The module exposes the main types and operations under the import name
//! `patfbp`: phantom construction, the forward simulation, the four
//! filtered-backprojection reconstructors, the kernel closed forms and the
//! semi-analytic oracles. Fields and traces cross the boundary as flat
//! `list[float]` plus shape, which keeps the binding free of a NumPy
//! dependency (wrap with `np.array(...).reshape(shape)` on the Python side).

use patfbp_core::config;
use patfbp_core::grid::{build_detectors, build_grid, build_timegrid};
use patfbp_core::phantom::{self, PhantomSpec};
use patfbp_core::pipeline;
use patfbp_core::recon2d::{self, Horizon};
use patfbp_core::sphmeans;
use patfbp_core::wavesim::{self, PaddedDomain, Propagator, TraceSet};
use patfbp_core::Error;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Format(_) | Error::MissingTrace(_) => {
            PyIOError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_horizon(name: &str) -> PyResult<Horizon> {
    match name {
        "finite" => Ok(Horizon::Finite),
        "infinite" => Ok(Horizon::Infinite),
        _ => Err(PyValueError::new_err(format!(
            "horizon must be 'finite' or 'infinite', got '{name}'"
        ))),
    }
}

/// A phantom specification (head preset or explicit Gaussian sum).
#[pyclass(name = "PhantomSpec")]
#[derive(Clone)]
struct PyPhantomSpec {
    inner: PhantomSpec,
}

#[pymethods]
impl PyPhantomSpec {
    /// The committed head-like experiment phantom.
    #[staticmethod]
    fn head() -> PyPhantomSpec {
        PyPhantomSpec { inner: phantom::head_phantom() }
    }

    /// A Gaussian-sum phantom from `[(cx, cy, width, amplitude), ...]`.
    #[staticmethod]
    fn gaussians(list: Vec<(f64, f64, f64, f64)>) -> PyPhantomSpec {
        PyPhantomSpec {
            inner: PhantomSpec::gaussians(
                list.into_iter().map(|(x, y, s, a)| ([x, y], s, a)).collect(),
            ),
        }
    }

    fn is_gaussian_only(&self) -> bool {
        self.inner.is_gaussian_only()
    }
}

/// A square raster field with its grid parameters.
#[pyclass(name = "Field")]
#[derive(Clone)]
struct PyField {
    inner: patfbp_core::field::ScalarField2D,
}

#[pymethods]
impl PyField {
    #[getter]
    fn n(&self) -> usize {
        self.inner.grid.n
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.inner.grid.rho
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.data.dim()
    }

    /// Row-major samples (first axis x).
    fn values(&self) -> Vec<f64> {
        self.inner.data.iter().copied().collect()
    }

    fn max_abs(&self) -> f64 {
        self.inner.max_abs()
    }
}

/// Detector readings over time, with kind tag and mixing weights.
#[pyclass(name = "TraceSet")]
#[derive(Clone)]
struct PyTraceSet {
    inner: TraceSet,
}

#[pymethods]
impl PyTraceSet {
    #[getter]
    fn kind(&self) -> String {
        match self.inner.kind {
            wavesim::TraceKind::Dirichlet => "dirichlet".into(),
            wavesim::TraceKind::Neumann => "neumann".into(),
            wavesim::TraceKind::Mixed => "mixed".into(),
        }
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.data.dim()
    }

    #[getter]
    fn weights(&self) -> (f64, f64) {
        self.inner.weights
    }

    fn values(&self) -> Vec<f64> {
        self.inner.data.iter().copied().collect()
    }

    fn max_abs(&self) -> f64 {
        self.inner.max_abs()
    }
}

/// Rasterize a phantom on an `n` x `n` grid over `[-rho, rho]^2`.
#[pyfunction]
fn rasterize(spec: &PyPhantomSpec, n: usize, rho: f64) -> PyResult<PyField> {
    let grid = build_grid(n, rho, [0.0, 0.0]).map_err(to_py)?;
    Ok(PyField { inner: phantom::rasterize(&spec.inner, &grid).map_err(to_py)? })
}

/// Analytic value of a Gaussian-sum phantom at a point.
#[pyfunction]
fn eval_analytic(spec: &PyPhantomSpec, x: f64, y: f64) -> PyResult<f64> {
    phantom::eval_analytic(&spec.inner, [x, y]).map_err(to_py)
}

/// Forward-simulate and return `(dirichlet, neumann)` traces on the unit
/// detector circle.
#[pyfunction]
fn simulate(spec: &PyPhantomSpec, n: usize, t_end: f64, dt: f64) -> PyResult<(PyTraceSet, PyTraceSet)> {
    let grid = build_grid(n, 1.0, [0.0, 0.0]).map_err(to_py)?;
    let geom = build_detectors(1.0, [0.0, 0.0], grid.dx).map_err(to_py)?;
    let tg = build_timegrid(t_end, dt).map_err(to_py)?;
    let field = phantom::rasterize(&spec.inner, &grid).map_err(to_py)?;
    let pad = PaddedDomain::for_horizon(&grid, t_end).map_err(to_py)?;
    let prop = Propagator::new(&field, &pad).map_err(to_py)?;
    let (d, nn) = wavesim::extract_traces(&prop, &geom, &tg).map_err(to_py)?;
    Ok((PyTraceSet { inner: d }, PyTraceSet { inner: nn }))
}

/// Elementwise `a * dirichlet + b * neumann`.
#[pyfunction]
fn combine_mixed(d: &PyTraceSet, n: &PyTraceSet, a: f64, b: f64) -> PyResult<PyTraceSet> {
    Ok(PyTraceSet { inner: wavesim::combine_mixed(&d.inner, &n.inner, a, b).map_err(to_py)? })
}

/// Seeded Gaussian noise with std `percent * max|data|`.
#[pyfunction]
fn add_noise(trace: &PyTraceSet, percent: f64, seed: u64) -> PyResult<PyTraceSet> {
    Ok(PyTraceSet { inner: wavesim::add_noise(&trace.inner, percent, seed).map_err(to_py)? })
}

/// Neumann-data reconstruction (`horizon` = "finite" or "infinite").
#[pyfunction]
fn reconstruct_neumann(trace: &PyTraceSet, n: usize, horizon: &str) -> PyResult<PyField> {
    let grid = build_grid(n, trace.inner.geometry.rho, trace.inner.geometry.center).map_err(to_py)?;
    let r = recon2d::reconstruct_neumann(&trace.inner, &grid, parse_horizon(horizon)?)
        .map_err(to_py)?;
    Ok(PyField { inner: r.field })
}

/// Dirichlet-data reconstruction.
#[pyfunction]
fn reconstruct_dirichlet(trace: &PyTraceSet, n: usize, horizon: &str) -> PyResult<PyField> {
    let grid = build_grid(n, trace.inner.geometry.rho, trace.inner.geometry.center).map_err(to_py)?;
    let r = recon2d::reconstruct_dirichlet(&trace.inner, &grid, parse_horizon(horizon)?)
        .map_err(to_py)?;
    Ok(PyField { inner: r.field })
}

/// Mixed-data reconstruction (scales by `1/b` internally).
#[pyfunction]
fn reconstruct_mixed(trace: &PyTraceSet, n: usize, horizon: &str) -> PyResult<PyField> {
    let grid = build_grid(n, trace.inner.geometry.rho, trace.inner.geometry.center).map_err(to_py)?;
    let r =
        recon2d::reconstruct_mixed(&trace.inner, &grid, parse_horizon(horizon)?).map_err(to_py)?;
    Ok(PyField { inner: r.field })
}

/// Range-condition residual: the Neumann operator applied to Dirichlet data.
#[pyfunction]
fn range_condition_residual(trace: &PyTraceSet, n: usize, horizon: &str) -> PyResult<PyField> {
    let grid = build_grid(n, trace.inner.geometry.rho, trace.inner.geometry.center).map_err(to_py)?;
    let r = recon2d::range_condition_residual(&trace.inner, &grid, parse_horizon(horizon)?)
        .map_err(to_py)?;
    Ok(PyField { inner: r.field })
}

/// Discrete L2 error over the interior of the detector disk.
#[pyfunction]
fn l2_error(a: &PyField, b: &PyField) -> PyResult<f64> {
    recon2d::l2_error(&a.inner, &b.inner).map_err(to_py)
}

/// `l2_error / l2_norm(reference)`.
#[pyfunction]
fn rel_l2_error(recon: &PyField, reference: &PyField) -> PyResult<f64> {
    recon2d::rel_l2_error(&recon.inner, &reference.inner).map_err(to_py)
}

/// Unscaled finite-time kernel.
#[pyfunction]
fn tilde_k_t(r1: f64, r2: f64, t_end: f64) -> PyResult<f64> {
    patfbp_core::kernels::tilde_k_t(r1, r2, t_end).map_err(to_py)
}

/// Finite-time kernel `k_T`.
#[pyfunction]
fn k_t(r1: f64, r2: f64, t_end: f64) -> PyResult<f64> {
    patfbp_core::kernels::k_t(r1, r2, t_end).map_err(to_py)
}

/// Unlimited-time kernel `k_inf`.
#[pyfunction]
fn k_inf(r1: f64, r2: f64) -> f64 {
    patfbp_core::kernels::k_inf(r1, r2)
}

/// Circular mean of a Gaussian-sum phantom.
#[pyfunction]
fn circle_mean(spec: &PyPhantomSpec, x: f64, y: f64, r: f64) -> PyResult<f64> {
    sphmeans::circle_mean(&spec.inner, [x, y], r).map_err(to_py)
}

/// Semi-analytic solution value `u(x, t)` for a Gaussian-sum phantom.
#[pyfunction]
fn semianalytic_u_2d(spec: &PyPhantomSpec, x: f64, y: f64, t: f64) -> PyResult<f64> {
    sphmeans::semianalytic_u_2d(&spec.inner, [x, y], t).map_err(to_py)
}

/// Run the validation suites; returns the JSON report as a string.
#[pyfunction]
fn validate() -> String {
    pipeline::report_to_json(&pipeline::cmd_validate())
}

/// Names of the committed experiment presets.
#[pyfunction]
fn presets() -> Vec<String> {
    vec!["paper-defaults".into(), "desk-scale".into()]
}

/// Battery column identifiers in their fixed order.
#[pyfunction]
fn battery_columns() -> Vec<String> {
    config::ALL_COLUMNS.iter().map(|s| s.to_string()).collect()
}

#[pymodule]
fn patfbp(_py: Python<'_>, m: &PyModule) -> PyResult<()> {
    m.add_class::<PyPhantomSpec>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyTraceSet>()?;
    m.add_function(wrap_pyfunction!(rasterize, m)?)?;
    m.add_function(wrap_pyfunction!(eval_analytic, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(combine_mixed, m)?)?;
    m.add_function(wrap_pyfunction!(add_noise, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_neumann, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_dirichlet, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_mixed, m)?)?;
    m.add_function(wrap_pyfunction!(range_condition_residual, m)?)?;
    m.add_function(wrap_pyfunction!(l2_error, m)?)?;
    m.add_function(wrap_pyfunction!(rel_l2_error, m)?)?;
    m.add_function(wrap_pyfunction!(tilde_k_t, m)?)?;
    m.add_function(wrap_pyfunction!(k_t, m)?)?;
    m.add_function(wrap_pyfunction!(k_inf, m)?)?;
    m.add_function(wrap_pyfunction!(circle_mean, m)?)?;
    m.add_function(wrap_pyfunction!(semianalytic_u_2d, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(battery_columns, m)?)?;
    Ok(())
}
