//! Python bindings. Problems, grids and run settings are passed as plain
//! dicts with the same keys as the TOML configuration.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use critwave::audit::{audit_inequalities, weak_residual, CutoffSpec, Psi};
use critwave::config::{ConfigFile, GridSection};
use critwave::criticality::{classify as classify_exponents, predicted_law, DEFAULT_TOLERANCE};
use critwave::grid::{damped_wave_propagator, make_grid, GridSpec};
use critwave::problem::ProblemSpec;
use critwave::run::{self, RunConfig, RunResult};
use critwave::sweep::{self, FitLaw, Rung, SweepSpec};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(runtime_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(value_err)
}

fn grid_from(problem: &ProblemSpec, grid: &Bound<'_, PyAny>) -> PyResult<GridSpec> {
    let g: GridSection = from_py(grid)?;
    make_grid(problem.n, g.half_width, g.points).map_err(value_err)
}

fn problem_from(obj: &Bound<'_, PyAny>) -> PyResult<ProblemSpec> {
    let p: ProblemSpec = from_py(obj)?;
    p.validate().map_err(value_err)?;
    Ok(p)
}

fn config_from(obj: &Bound<'_, PyAny>) -> PyResult<RunConfig> {
    let c: RunConfig = from_py(obj)?;
    c.validate().map_err(value_err)?;
    Ok(c)
}

/// Regime of `(p, q)` in dimension `n` and the predicted lifespan law.
#[pyfunction]
#[pyo3(signature = (p, q, n, tol = DEFAULT_TOLERANCE))]
fn classify<'py>(py: Python<'py>, p: f64, q: f64, n: usize, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    let report = classify_exponents(p, q, n, tol).map_err(value_err)?;
    let law = predicted_law(p, q, n).ok();
    to_py(py, &serde_json::json!({ "report": report, "law": law }))
}

/// Entries `[[e11, e12], [e21, e22]]` of the damped-wave propagator.
#[pyfunction]
fn propagator(t: f64, lam: f64) -> [[f64; 2]; 2] {
    let e = damped_wave_propagator(t, lam);
    [[e.e11, e.e12], [e.e21, e.e22]]
}

#[pyclass(module = "critwave", name = "Trajectory", skip_from_py_object)]
#[derive(Clone)]
struct PyTrajectory {
    inner: run::Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyTrajectory { inner: run::Trajectory::load(&path).map_err(value_err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(runtime_err)
    }

    #[getter]
    fn fields(&self) -> Vec<String> {
        self.inner.header.fields.clone()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.frames.iter().map(|f| f.t).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.frames.len()
    }

    /// Fields of frame `i` as a list of flat arrays in `fields` order.
    fn frame(&self, i: usize) -> PyResult<Vec<Vec<f64>>> {
        self.inner
            .frames
            .get(i)
            .map(|f| f.fields.clone())
            .ok_or_else(|| PyValueError::new_err(format!("frame {i} out of range")))
    }

    fn header<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.header)
    }

    /// Cutoff-function inequality audit; `mu` defaults to the minimal admissible value.
    #[pyo3(signature = (mu = None, points = 16))]
    fn audit<'py>(&self, py: Python<'py>, mu: Option<f64>, points: usize) -> PyResult<Bound<'py, PyAny>> {
        let base = CutoffSpec::for_trajectory(&self.inner).map_err(value_err)?;
        let cutoff =
            CutoffSpec::new(mu.unwrap_or(base.mu), base.r0, base.r1, self.inner.t_covered(), points)
                .map_err(value_err)?;
        let report = audit_inequalities(&self.inner, &cutoff).map_err(runtime_err)?;
        to_py(py, &report)
    }

    /// Residual of the weak identities against the radial cutoff test function.
    fn weak_residual<'py>(&self, py: Python<'py>, radius: f64, mu: f64) -> PyResult<Bound<'py, PyAny>> {
        let test = Psi::new(radius, mu).map_err(value_err)?;
        to_py(py, &weak_residual(&self.inner, &test).map_err(value_err)?)
    }
}

#[pyclass(module = "critwave", name = "RunResult")]
struct PyRunResult {
    inner: RunResult,
}

#[pymethods]
impl PyRunResult {
    #[getter]
    fn status(&self) -> &'static str {
        self.inner.status.as_str()
    }

    #[getter]
    fn t_num(&self) -> Option<f64> {
        self.inner.t_num
    }

    #[getter]
    fn t_final(&self) -> f64 {
        self.inner.t_final
    }

    #[getter]
    fn trajectory(&self) -> PyTrajectory {
        PyTrajectory { inner: self.inner.trajectory.clone() }
    }

    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.summary())
    }

    fn history<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.history)
    }
}

/// Integrate one problem. `grid` is `{"L": .., "N": ..}`; `config` needs at least `t_max`.
#[pyfunction]
#[pyo3(signature = (problem, grid, config, linear = false))]
fn simulate(
    py: Python<'_>,
    problem: &Bound<'_, PyAny>,
    grid: &Bound<'_, PyAny>,
    config: &Bound<'_, PyAny>,
    linear: bool,
) -> PyResult<PyRunResult> {
    let problem = problem_from(problem)?;
    let grid = grid_from(&problem, grid)?;
    let config = config_from(config)?;
    let result = py.detach(|| {
        if linear {
            run::run_linear(&problem, &grid, &config)
        } else {
            run::run(&problem, &grid, &config)
        }
    });
    Ok(PyRunResult { inner: result.map_err(runtime_err)? })
}

#[pyclass(module = "critwave", name = "SweepTable")]
struct PySweepTable {
    inner: sweep::SweepTable,
}

#[pymethods]
impl PySweepTable {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PySweepTable { inner: sweep::SweepTable::load(&path).map_err(value_err)? })
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        Ok(PySweepTable { inner: sweep::SweepTable::from_csv(text).map_err(value_err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(runtime_err)
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn rows<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.rows)
    }

    fn __len__(&self) -> usize {
        self.inner.rows.len()
    }

    /// `law` is one of "critical", "subcritical", "fixed-kappa".
    fn fit<'py>(&self, py: Python<'py>, law: &str) -> PyResult<Bound<'py, PyAny>> {
        let law = FitLaw::parse(law).ok_or_else(|| PyValueError::new_err(format!("unknown law {law:?}")))?;
        to_py(py, &sweep::fit_scaling(&self.inner, law).map_err(value_err)?)
    }
}

/// Sweep `eps_list` over the grid `ladder` (a list of `{"L": .., "N": ..}`).
#[pyfunction]
#[pyo3(signature = (problem, eps_list, ladder, config, jobs = 1))]
fn run_sweep(
    py: Python<'_>,
    problem: &Bound<'_, PyAny>,
    eps_list: Vec<f64>,
    ladder: &Bound<'_, PyAny>,
    config: &Bound<'_, PyAny>,
    jobs: usize,
) -> PyResult<PySweepTable> {
    let ladder: Vec<Rung> = from_py(ladder)?;
    let spec = SweepSpec { problem: problem_from(problem)?, eps_list, ladder, config: config_from(config)?, jobs, output: None };
    spec.validate().map_err(value_err)?;
    let table = py.detach(|| sweep::run_sweep(&spec)).map_err(runtime_err)?;
    Ok(PySweepTable { inner: table })
}

/// Parse a TOML configuration file and return it with all defaults filled in.
#[pyfunction]
fn load_config<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ConfigFile::load(&path).map_err(value_err)?;
    to_py(py, &cfg.resolved(1).map_err(value_err)?)
}

#[pymodule]
#[pyo3(name = "critwave")]
fn critwave_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(propagator, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(load_config, m)?)?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyRunResult>()?;
    m.add_class::<PySweepTable>()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dicts_round_trip_through_the_config_schema() {
        Python::initialize();
        Python::attach(|py| {
            let problem = ProblemSpec {
                model: critwave::problem::ModelKind::DampedWave,
                n: 1,
                p: 3.0,
                q: 3.0,
                eps: 0.5,
                data: critwave::problem::InitialDataSpec::bump(0.4, 0.0, 0.4, 0.0, 4.0),
            };
            let obj = to_py(py, &problem).unwrap();
            assert_eq!(problem_from(&obj).unwrap(), problem);
            let grid = py.eval(c"{'L': 64.0, 'N': 256}", None, None).unwrap();
            assert_eq!(grid_from(&problem, &grid).unwrap().points, 256);
            let bad = py.eval(c"{'t_max': 10.0, 'dt_0': 1.0}", None, None).unwrap();
            assert!(config_from(&bad).is_err());
        });
    }

    #[test]
    fn classify_returns_a_dict() {
        Python::initialize();
        Python::attach(|py| {
            let v = classify(py, 3.0, 3.0, 1, DEFAULT_TOLERANCE).unwrap();
            let regime: String = v.get_item("report").unwrap().get_item("regime").unwrap().extract().unwrap();
            assert_eq!(regime, "critical");
            assert!(classify(py, 0.5, 3.0, 1, DEFAULT_TOLERANCE).is_err());
        });
    }
}
