//! Python bindings for `continuum_teleop`.
//!
//! Configurations cross the boundary as plain JSON-compatible Python objects.
//! A partial dict is completed with the library defaults, and `overrides`
//! takes the same dotted keys as the `ctele` command line, e.g.
//! `{"control.dt": 0.002, "case": "case1"}`.

use nalgebra::{DMatrix, Vector2};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;
use serde_json::Value;

use continuum_teleop::actuation;
use continuum_teleop::continuum::ContinuumConfig;
use continuum_teleop::harness::{self, RunConfig, RunLog, RunOutcome};
use continuum_teleop::metrics;
use continuum_teleop::rcm::{self, AugmentedState};
use continuum_teleop::solver;
use continuum_teleop::Error;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::SolverFault { .. } => PyRuntimeError::new_err(e.to_string()),
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Converts any serializable value into native Python objects.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(json_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn dumps(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()
}

fn load_config(config: Option<&Bound<'_, PyAny>>, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<RunConfig> {
    let base = match config {
        Some(c) if !c.is_none() => serde_json::from_str::<Value>(&dumps(c)?).map_err(json_err)?,
        _ => Value::Object(Default::default()),
    };
    let mut pairs = Vec::new();
    if let Some(o) = overrides {
        for (k, v) in o.iter() {
            pairs.push((k.extract::<String>()?, dumps(&v)?));
        }
    }
    RunConfig::from_value_with_overrides(base, &pairs).map_err(to_py_err)
}

/// The complete default configuration as a dict.
#[pyfunction]
fn default_config(py: Python<'_>) -> PyResult<Py<PyAny>> {
    to_py(py, &RunConfig::default())
}

/// Validates and completes a configuration, returning the full dict.
#[pyfunction]
#[pyo3(signature = (config=None, overrides=None))]
fn resolve_config(
    py: Python<'_>,
    config: Option<&Bound<'_, PyAny>>,
    overrides: Option<&Bound<'_, PyDict>>,
) -> PyResult<Py<PyAny>> {
    to_py(py, &load_config(config, overrides)?)
}

/// Result of an offline run with its summary and per-step log.
#[pyclass(name = "Run", frozen, module = "pyctele")]
struct PyRun {
    outcome: RunOutcome,
}

#[pymethods]
impl PyRun {
    /// Error statistics, RCM error, final λ and fault (if any).
    #[getter]
    fn summary(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.outcome.summary)
    }

    /// True when the run finished without a solver fault.
    #[getter]
    fn ok(&self) -> bool {
        self.outcome.ok()
    }

    #[getter]
    fn columns(&self) -> Vec<String> {
        RunLog::header()
    }

    /// Log rows in `columns` order.
    #[getter]
    fn rows(&self) -> Vec<Vec<f64>> {
        self.outcome.log.rows.iter().map(|r| r.values()).collect()
    }

    /// One log column by name.
    fn column(&self, name: &str) -> PyResult<Vec<f64>> {
        let i = RunLog::header()
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| PyValueError::new_err(format!("no column '{name}'")))?;
        Ok(self.outcome.log.rows.iter().map(|r| r.values()[i]).collect())
    }

    #[getter]
    fn final_state(&self) -> State {
        State {
            inner: self.outcome.final_state,
        }
    }

    /// Writes the CSV log and the JSON summary next to it; returns the
    /// summary path.
    fn write(&self, path: std::path::PathBuf) -> PyResult<std::path::PathBuf> {
        harness::write_outputs(&self.outcome, &path).map_err(to_py_err)
    }

    fn __len__(&self) -> usize {
        self.outcome.log.rows.len()
    }
}

/// Runs the configured trajectory offline.
///
/// A solver fault does not raise: the partial run is returned with `ok`
/// false and the reason in `summary["fault"]`.
#[pyfunction]
#[pyo3(signature = (config=None, overrides=None))]
fn simulate(config: Option<&Bound<'_, PyAny>>, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<PyRun> {
    let cfg = load_config(config, overrides)?;
    let outcome = harness::run_simulation(&cfg).map_err(to_py_err)?;
    Ok(PyRun { outcome })
}

/// Compares each analytic Jacobian with central finite differences.
#[pyfunction]
#[pyo3(signature = (samples=1000, seed=7, config=None))]
fn check_jacobians(
    py: Python<'_>,
    samples: usize,
    seed: u64,
    config: Option<&Bound<'_, PyAny>>,
) -> PyResult<Py<PyAny>> {
    let cfg = load_config(config, None)?;
    to_py(py, &harness::check_jacobians(&cfg.kinematics, samples, seed))
}

/// Tracking and dexterity comparison of runs, labelled by their case.
#[pyfunction]
fn case_report(py: Python<'_>, runs: Vec<PyRef<'_, PyRun>>) -> PyResult<Py<PyAny>> {
    let series: Vec<_> = runs
        .iter()
        .map(|r| {
            let log = &r.outcome.log;
            log.series(&format!("case{}", log.case.index()))
        })
        .collect();
    to_py(py, &metrics::case_report(&series))
}

/// Augmented state: seven arm joints, bending θ and δ, and λ.
#[pyclass(name = "State", module = "pyctele", skip_from_py_object)]
#[derive(Clone)]
struct State {
    inner: AugmentedState,
}

#[pymethods]
impl State {
    #[new]
    fn new(q_arm: [f64; 7], theta: f64, delta: f64, lam: f64) -> Self {
        Self {
            inner: AugmentedState {
                q_arm: q_arm.into(),
                psi: ContinuumConfig::new(theta, delta),
                lambda: lam,
            },
        }
    }

    /// Initial state of a configuration.
    #[staticmethod]
    #[pyo3(signature = (config=None))]
    fn initial(config: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        Ok(Self {
            inner: load_config(config, None)?.initial.state(),
        })
    }

    #[getter]
    fn q_arm(&self) -> Vec<f64> {
        self.inner.q_arm.iter().copied().collect()
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.inner.psi.theta
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.psi.delta
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda
    }

    /// All ten coordinates in order.
    fn to_list(&self) -> Vec<f64> {
        self.inner.to_vector().iter().copied().collect()
    }

    /// Tip position (m) and orientation quaternion (x, y, z, w) in the base frame.
    #[pyo3(signature = (config=None))]
    fn tip_pose(&self, config: Option<&Bound<'_, PyAny>>) -> PyResult<([f64; 3], [f64; 4])> {
        let cfg = load_config(config, None)?;
        let tip = rcm::state_poses(&self.inner, &cfg.kinematics).tip;
        Ok((tip.translation.into(), tip.quaternion_xyzw()))
    }

    /// The shaft point selected by λ.
    #[pyo3(signature = (config=None))]
    fn rcm_point(&self, config: Option<&Bound<'_, PyAny>>) -> PyResult<[f64; 3]> {
        let cfg = load_config(config, None)?;
        Ok(rcm::rcm_point(&self.inner, &cfg.kinematics).into())
    }

    /// Stacked 9×10 Jacobian: RCM rows, then linear and angular tip rows.
    #[pyo3(signature = (config=None))]
    fn jacobian(&self, config: Option<&Bound<'_, PyAny>>) -> PyResult<Vec<Vec<f64>>> {
        let cfg = load_config(config, None)?;
        Ok(rows_of(&rcm::assemble(&self.inner, &cfg.kinematics).j_aug_dynamic()))
    }

    fn __repr__(&self) -> String {
        format!(
            "State(q_arm={:?}, theta={}, delta={}, lam={})",
            self.q_arm(),
            self.inner.psi.theta,
            self.inner.psi.delta,
            self.inner.lambda
        )
    }
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("expected a non-empty rectangular list of rows"));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.into_iter().flatten(),
    ))
}

/// Truncated-SVD pseudoinverse of a matrix given as a list of rows.
#[pyfunction]
#[pyo3(signature = (matrix, tau=1e-8))]
fn pinv(matrix: Vec<Vec<f64>>, tau: f64) -> PyResult<Vec<Vec<f64>>> {
    let m = matrix_from_rows(matrix)?;
    if !m.iter().all(|x| x.is_finite()) || !tau.is_finite() || tau < 0.0 {
        return Err(PyValueError::new_err("matrix and tau must be finite, tau non-negative"));
    }
    Ok(rows_of(&solver::pinv(&m, tau)))
}

/// Dexterity metrics of a matrix given as a list of rows.
#[pyfunction]
fn svd_metrics(py: Python<'_>, matrix: Vec<Vec<f64>>) -> PyResult<Py<PyAny>> {
    to_py(py, &metrics::svd_metrics(&matrix_from_rows(matrix)?))
}

/// Motor pulley rates (rad/s) for bending rates `theta_dot`, `delta_dot`.
#[pyfunction]
#[pyo3(signature = (theta, delta, theta_dot, delta_dot, config=None))]
fn motor_velocities(
    theta: f64,
    delta: f64,
    theta_dot: f64,
    delta_dot: f64,
    config: Option<&Bound<'_, PyAny>>,
) -> PyResult<[f64; 4]> {
    let cfg = load_config(config, None)?;
    let psi = ContinuumConfig::new(theta, delta);
    let rates = actuation::motor_velocities(
        &psi,
        &Vector2::new(theta_dot, delta_dot),
        &cfg.kinematics.continuum,
        &cfg.actuation,
    );
    Ok(rates.into())
}

/// The teleoperation session without the socket: feed it protocol messages
/// and advance it one control step at a time.
#[pyclass(name = "TeleopService", module = "pyctele")]
struct PyTeleopService {
    inner: harness::TeleopService,
}

#[pymethods]
impl PyTeleopService {
    #[new]
    #[pyo3(signature = (config=None, overrides=None))]
    fn new(config: Option<&Bound<'_, PyAny>>, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let cfg = load_config(config, overrides)?;
        Ok(Self {
            inner: harness::TeleopService::new(cfg).map_err(to_py_err)?,
        })
    }

    /// Applies one client message given as a dict (or JSON text). Returns the
    /// error reply the server would send, or None.
    fn handle(&mut self, message: &Bound<'_, PyAny>) -> PyResult<Option<String>> {
        let text = match message.extract::<String>() {
            Ok(s) => s,
            Err(_) => dumps(message)?,
        };
        Ok(self.inner.handle_text(&text))
    }

    /// Advances `steps` control periods.
    #[pyo3(signature = (steps=1))]
    fn tick(&mut self, steps: usize) {
        for _ in 0..steps {
            self.inner.tick();
        }
    }

    /// Releases the clutch as a dropped connection would.
    fn disconnect(&mut self) {
        self.inner.disconnect();
    }

    /// The state frame the server would broadcast now.
    fn snapshot(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.snapshot())
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.time()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt()
    }

    #[getter]
    fn engaged(&self) -> bool {
        self.inner.engaged()
    }

    #[getter]
    fn faulted(&self) -> bool {
        self.inner.faulted()
    }

    #[getter]
    fn state(&self) -> State {
        State {
            inner: *self.inner.state(),
        }
    }
}

/// Module initializer; public so embedding hosts and tests can register it.
#[pymodule]
pub fn pyctele(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(resolve_config, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(check_jacobians, m)?)?;
    m.add_function(wrap_pyfunction!(case_report, m)?)?;
    m.add_function(wrap_pyfunction!(pinv, m)?)?;
    m.add_function(wrap_pyfunction!(svd_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(motor_velocities, m)?)?;
    m.add_class::<PyRun>()?;
    m.add_class::<State>()?;
    m.add_class::<PyTeleopService>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
