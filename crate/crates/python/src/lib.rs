//! Python bindings: model parameters, the G-function, exceptional points,
//! the displaced-basis approximations, the Fock-space oracle and sweeps.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use aniso_rabi::gfunc::{self, ExceptionalOptions, SeriesOptions, ZeroScanOptions};
use aniso_rabi::grwa;
use aniso_rabi::oracle::{self, OracleOptions};
use aniso_rabi::spectrum::{self, CouplingMode, Grid, Method, SolverOptions, SweepSpec, SweepVariable};
use aniso_rabi::{Error, Parity};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::InvalidParameter(_) | Error::ZeroCoupling { .. } | Error::PoleProximity { .. } | Error::NonSymmetricInput { .. } => {
            PyValueError::new_err(err.to_string())
        }
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

fn parity(s: &str) -> PyResult<Parity> {
    s.parse().map_err(to_py)
}

#[pyclass(name = "ModelParams", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyModelParams {
    inner: aniso_rabi::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    fn new(delta: f64, g1: f64, g2: f64) -> PyResult<Self> {
        Ok(Self {
            inner: aniso_rabi::ModelParams::new(delta, g1, g2).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn with_ratio(delta: f64, g1: f64, r: f64) -> PyResult<Self> {
        Ok(Self {
            inner: aniso_rabi::ModelParams::with_ratio(delta, g1, r).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_alpha(delta: f64, alpha: f64, r: f64) -> PyResult<Self> {
        Ok(Self {
            inner: aniso_rabi::ModelParams::from_alpha(delta, alpha, r).map_err(to_py)?,
        })
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    #[getter]
    fn g1(&self) -> f64 {
        self.inner.g1
    }

    #[getter]
    fn g2(&self) -> f64 {
        self.inner.g2
    }

    fn spin_flipped(&self) -> Self {
        Self {
            inner: self.inner.spin_flipped(),
        }
    }

    /// λ±, β, α, γ and r as a dict.
    fn derive<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = self.inner.derive();
        let out = PyDict::new(py);
        out.set_item("lambda_plus", d.lambda_plus)?;
        out.set_item("lambda_minus", d.lambda_minus)?;
        out.set_item("beta", d.beta)?;
        out.set_item("alpha", d.alpha)?;
        out.set_item("gamma", d.gamma)?;
        out.set_item("r", d.r)?;
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!("ModelParams(delta={}, g1={}, g2={})", self.inner.delta, self.inner.g1, self.inner.g2)
    }
}

#[pyfunction]
#[pyo3(signature = (params, x, parity_label, tol = 1e-14, n_max = 2000))]
fn g_function(params: &PyModelParams, x: f64, parity_label: &str, tol: f64, n_max: usize) -> PyResult<f64> {
    let opts = SeriesOptions { tol, n_max };
    Ok(gfunc::g_function(&params.inner, x, parity(parity_label)?, &opts).map_err(to_py)?.value)
}

/// Regular eigenvalues E with x = E + λ₊ in [xmin, xmax].
#[pyfunction]
fn find_regular_zeros(params: &PyModelParams, xmin: f64, xmax: f64, parity_label: &str) -> PyResult<Vec<f64>> {
    let scan = gfunc::find_regular_zeros(&params.inner, (xmin, xmax), parity(parity_label)?, &ZeroScanOptions::default())
        .map_err(to_py)?;
    Ok(scan.energies)
}

#[pyfunction]
fn lowest_regular_levels(params: &PyModelParams, parity_label: &str, count: usize) -> PyResult<Vec<f64>> {
    let scan = gfunc::lowest_regular_levels(&params.inner, parity(parity_label)?, count, &ZeroScanOptions::default())
        .map_err(to_py)?;
    Ok(scan.energies)
}

#[pyfunction]
fn exceptional_condition(params: &PyModelParams, n: usize) -> PyResult<f64> {
    gfunc::exceptional_condition(&params.inner, n).map_err(to_py)
}

#[pyfunction]
fn first_crossing_coupling(delta: f64, r: f64) -> Option<f64> {
    gfunc::first_crossing_coupling(delta, r)
}

/// Roots of the n-th exceptional condition along g2 = r·g1 as
/// (g1, g2, energy, residual) tuples.
#[pyfunction]
#[pyo3(signature = (delta, r, n, g1_min = 1e-3, g1_max = 1.5))]
fn find_exceptional(delta: f64, r: f64, n: usize, g1_min: f64, g1_max: f64) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let sols = gfunc::find_exceptional(delta, r, n, (g1_min, g1_max), &ExceptionalOptions::default()).map_err(to_py)?;
    Ok(sols.iter().map(|s| (s.g1_star, s.g2_star, s.energy, s.condition_residual)).collect())
}

#[pyfunction]
fn laguerre(n: usize, k: usize, y: f64) -> f64 {
    grwa::laguerre(n, k, y)
}

/// Sorted adiabatic energies of one parity for manifolds 0..=m_max.
#[pyfunction]
fn adiabatic_levels(params: &PyModelParams, parity_label: &str, m_max: usize) -> PyResult<Vec<f64>> {
    let levels = grwa::adiabatic_levels(&params.inner, m_max);
    Ok(grwa::sector_energies(&levels, parity(parity_label)?))
}

/// Sorted GRWA energies of one parity; blocks with complex roots are left out.
#[pyfunction]
fn grwa_levels(params: &PyModelParams, parity_label: &str, m_max: usize) -> PyResult<Vec<f64>> {
    Ok(grwa::grwa_levels(&params.inner, m_max).sector(parity(parity_label)?))
}

#[pyfunction]
fn truncated_solve(params: &PyModelParams, parity_label: &str, n_tr: usize) -> PyResult<Vec<f64>> {
    let levels = grwa::truncated_solve(&params.inner, parity(parity_label)?, n_tr).map_err(to_py)?;
    Ok(levels.into_iter().map(|l| l.energy).collect())
}

/// Cutoff-converged reference spectrum: dict with `fock_cutoff`,
/// `converged_count`, `even` and `odd` (ascending energies).
#[pyfunction]
#[pyo3(signature = (params, n_levels, tol = 1e-10, cutoff_cap = 1024))]
fn oracle_spectrum<'py>(
    py: Python<'py>,
    params: &PyModelParams,
    n_levels: usize,
    tol: f64,
    cutoff_cap: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = OracleOptions {
        tol,
        cutoff_cap,
        ..OracleOptions::default()
    };
    let res = oracle::spectrum(&params.inner, n_levels, &opts).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("fock_cutoff", res.fock_cutoff)?;
    out.set_item("converged_count", res.converged_count)?;
    out.set_item("even", res.sector(Parity::Even))?;
    out.set_item("odd", res.sector(Parity::Odd))?;
    Ok(out)
}

/// Sweep at fixed ratio r. Returns (sweep_value, method, parity, level,
/// energy, flag) tuples in table order.
#[pyfunction]
#[pyo3(signature = (delta, r, start, stop, step, n_levels, methods, sweep = "g1"))]
#[allow(clippy::too_many_arguments)]
fn run_sweep(
    delta: f64,
    r: f64,
    start: f64,
    stop: f64,
    step: f64,
    n_levels: usize,
    methods: Vec<String>,
    sweep: &str,
) -> PyResult<Vec<(f64, String, String, usize, f64, String)>> {
    let methods = methods.iter().map(|m| m.parse::<Method>()).collect::<Result<Vec<_>, _>>().map_err(to_py)?;
    let spec = SweepSpec {
        delta,
        coupling: CouplingMode::Ratio(r),
        sweep: sweep.parse::<SweepVariable>().map_err(to_py)?,
        grid: Grid { start, stop, step },
        n_levels,
        methods,
        options: SolverOptions::default(),
    };
    let table = spectrum::run_sweep(&spec).map_err(to_py)?;
    Ok(table
        .rows
        .into_iter()
        .map(|r| (r.sweep_value, r.method.to_string(), r.parity.to_string(), r.level, r.energy, r.flag))
        .collect())
}

#[pymodule]
fn aniso_rabi_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_function(wrap_pyfunction!(g_function, m)?)?;
    m.add_function(wrap_pyfunction!(find_regular_zeros, m)?)?;
    m.add_function(wrap_pyfunction!(lowest_regular_levels, m)?)?;
    m.add_function(wrap_pyfunction!(exceptional_condition, m)?)?;
    m.add_function(wrap_pyfunction!(first_crossing_coupling, m)?)?;
    m.add_function(wrap_pyfunction!(find_exceptional, m)?)?;
    m.add_function(wrap_pyfunction!(laguerre, m)?)?;
    m.add_function(wrap_pyfunction!(adiabatic_levels, m)?)?;
    m.add_function(wrap_pyfunction!(grwa_levels, m)?)?;
    m.add_function(wrap_pyfunction!(truncated_solve, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    Ok(())
}
