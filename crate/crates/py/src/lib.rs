//! Python module `cogwpt`.
//!
//! ```python
//! import cogwpt
//! s = cogwpt.Scenario.generate(n_subcarriers=16, n_antennas=4, seed=0)
//! sol = cogwpt.solve(s, "proposed")
//! print(sol.total, sol.direct, sol.reactive)
//! ```

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use cogwpt_core::beamopt::{BeamformingSolution, DEFAULT_GRID_POINTS};
use cogwpt_core::experiment::{run_sweep, solve_scheme, Axis, ExperimentConfig, Scheme, SweepSpec};
use cogwpt_core::lambda_range::{lambda_range, p2_feasible};
use cogwpt_core::linalg::CVector;
use cogwpt_core::scenario::{load_scenario, save_scenario, Scenario};
use cogwpt_core::{oracle, waterfill as wf, Error};

create_exception!(cogwpt, CogwptError, PyException);

fn py_err(e: Error) -> PyErr {
    CogwptError::new_err(format!("{} ({})", e, e.kind()))
}

fn to_vectors(rows: Vec<Vec<Complex64>>) -> Vec<CVector> {
    rows.into_iter().map(CVector::from_vec).collect()
}

fn from_vectors(vs: &[CVector]) -> Vec<Vec<Complex64>> {
    vs.iter().map(|v| v.iter().copied().collect()).collect()
}

/// One channel realization with its budgets.
#[pyclass(name = "Scenario", module = "cogwpt", from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: Scenario,
}

#[pymethods]
impl PyScenario {
    /// Draw channels from a config. `config` is TOML text (all fields
    /// required); `overrides` are dotted `key=value` strings applied on top
    /// of it or of the defaults.
    #[staticmethod]
    #[pyo3(signature = (n_subcarriers=None, n_antennas=None, seed=0, config=None, overrides=Vec::new()))]
    fn generate(
        n_subcarriers: Option<usize>,
        n_antennas: Option<usize>,
        seed: u64,
        config: Option<&str>,
        overrides: Vec<String>,
    ) -> PyResult<Self> {
        let mut cfg = match config {
            Some(text) => ExperimentConfig::from_toml(text, &overrides),
            None => ExperimentConfig::load(None, &overrides),
        }
        .map_err(py_err)?;
        if let Some(n) = n_subcarriers {
            cfg.n_subcarriers = n;
        }
        if let Some(m) = n_antennas {
            cfg.n_antennas = m;
        }
        cfg.validate().map_err(py_err)?;
        Ok(Self {
            inner: cfg.scenario(seed).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: load_scenario(path).map_err(py_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_scenario(&self.inner, path).map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CogwptError::new_err(e.to_string()))?;
        Ok(Self {
            inner: Scenario::from_json(&value).map_err(py_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json().to_string()
    }

    #[getter]
    fn n_subcarriers(&self) -> usize {
        self.inner.n_subcarriers
    }
    #[getter]
    fn n_antennas(&self) -> usize {
        self.inner.n_antennas
    }
    #[getter]
    fn h(&self) -> Vec<f64> {
        self.inner.h.clone()
    }
    #[getter]
    fn phi(&self) -> Vec<f64> {
        self.inner.phi.clone()
    }
    #[getter]
    fn g(&self) -> Vec<Vec<Complex64>> {
        from_vectors(&self.inner.g)
    }
    #[getter]
    fn f(&self) -> Vec<Vec<Complex64>> {
        from_vectors(&self.inner.f)
    }
    #[getter]
    fn sigma2(&self) -> f64 {
        self.inner.sigma2
    }
    #[getter]
    fn p_sum(&self) -> f64 {
        self.inner.p_sum
    }
    #[getter]
    fn q_sum(&self) -> f64 {
        self.inner.q_sum
    }
    #[setter]
    fn set_q_sum(&mut self, v: f64) {
        self.inner.q_sum = v;
    }
    #[getter]
    fn q_peak(&self) -> f64 {
        self.inner.q_peak
    }
    #[setter]
    fn set_q_peak(&mut self, v: f64) {
        self.inner.q_peak = v;
    }
    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }
    #[setter]
    fn set_gamma(&mut self, v: f64) {
        self.inner.gamma = v;
    }

    fn __repr__(&self) -> String {
        let s = &self.inner;
        format!(
            "Scenario(n_subcarriers={}, n_antennas={}, q_sum={}, q_peak={}, gamma={})",
            s.n_subcarriers, s.n_antennas, s.q_sum, s.q_peak, s.gamma
        )
    }
}

/// Beamformers and the resulting received power.
#[pyclass(name = "Solution", module = "cogwpt", frozen)]
struct PySolution {
    inner: BeamformingSolution,
    feasible: bool,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn total(&self) -> f64 {
        self.inner.breakdown.total
    }
    #[getter]
    fn direct(&self) -> f64 {
        self.inner.breakdown.direct
    }
    #[getter]
    fn reactive(&self) -> f64 {
        self.inner.breakdown.reactive
    }
    /// Primary water level induced by the beamformers.
    #[getter]
    fn water_level(&self) -> f64 {
        self.inner.lambda
    }
    #[getter]
    fn omegas(&self) -> Vec<Vec<Complex64>> {
        from_vectors(&self.inner.omegas)
    }
    #[getter]
    fn primary_power(&self) -> Vec<f64> {
        self.inner.primary_power.clone()
    }
    #[getter]
    fn interference(&self) -> Vec<f64> {
        self.inner.interference.clone()
    }
    #[getter]
    fn feasible(&self) -> bool {
        self.feasible
    }
    /// Solver diagnostics as JSON text.
    fn diagnostics_json(&self) -> String {
        serde_json::to_string(&self.inner.diagnostics).expect("diagnostics serialize")
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(total={:e}, direct={:e}, reactive={:e})",
            self.inner.breakdown.total, self.inner.breakdown.direct, self.inner.breakdown.reactive
        )
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(text: &str) -> PyResult<T> {
    text.parse().map_err(py_err)
}

/// Run `scheme` (proposed, zf, mrt or conventional) on a scenario.
#[pyfunction]
#[pyo3(signature = (scenario, scheme="proposed", lambda_grid=DEFAULT_GRID_POINTS))]
fn solve(py: Python<'_>, scenario: &PyScenario, scheme: &str, lambda_grid: usize) -> PyResult<PySolution> {
    let scheme: Scheme = parse(scheme)?;
    if lambda_grid < 2 {
        return Err(CogwptError::new_err("lambda_grid must be at least 2"));
    }
    let s = scenario.inner.clone();
    let inner = py.detach(|| solve_scheme(&s, scheme, lambda_grid, &[])).map_err(py_err)?;
    let feasible = inner.is_feasible(&s);
    Ok(PySolution { inner, feasible })
}

/// Primary water-filling: returns `(level, powers)`.
#[pyfunction]
fn waterfill(interference: Vec<f64>, h: Vec<f64>, sigma2: f64, p_sum: f64) -> PyResult<(f64, Vec<f64>)> {
    if interference.len() != h.len() {
        return Err(CogwptError::new_err("interference and h must have the same length"));
    }
    let r = wf::waterfill(&interference, &h, sigma2, p_sum);
    Ok((r.lambda, r.p))
}

/// `(total, direct, reactive)` received power for given beamformers.
#[pyfunction]
fn received_power(scenario: &PyScenario, omegas: Vec<Vec<Complex64>>) -> PyResult<(f64, f64, f64)> {
    let (b, _) = wf::received_power(&scenario.inner, &to_vectors(omegas)).map_err(py_err)?;
    Ok((b.total, b.direct, b.reactive))
}

/// Range `(lambda_min, lambda_max)` of reachable primary water levels.
#[pyfunction]
fn water_level_range(scenario: &PyScenario) -> PyResult<(f64, f64)> {
    let r = lambda_range(&scenario.inner, None).map_err(py_err)?;
    Ok((r.lambda_min, r.lambda_max))
}

/// Whether some beamforming drives the primary to water level `level`.
#[pyfunction]
fn level_feasible(scenario: &PyScenario, level: f64) -> PyResult<bool> {
    Ok(p2_feasible(&scenario.inner, level, None).map_err(py_err)?.is_feasible())
}

/// Exhaustive grid search for small scenarios (N ≤ 2, M ≤ 3): `(total, omegas)`.
#[pyfunction]
fn brute_force(py: Python<'_>, scenario: &PyScenario, resolution: usize) -> PyResult<(f64, Vec<Vec<Complex64>>)> {
    if resolution < 2 {
        return Err(CogwptError::new_err("resolution must be at least 2"));
    }
    let s = scenario.inner.clone();
    let r = py.detach(|| oracle::brute_force_p1(&s, resolution)).map_err(py_err)?;
    Ok((r.total, from_vectors(&r.omegas)))
}

/// Sweep one axis; returns rows as dicts keyed by the CSV column names.
#[pyfunction]
#[pyo3(signature = (axis, values=None, seeds=vec![0], schemes=None, config=None, overrides=Vec::new(), jobs=1))]
#[allow(clippy::too_many_arguments)]
fn sweep<'py>(
    py: Python<'py>,
    axis: &str,
    values: Option<Vec<f64>>,
    seeds: Vec<u64>,
    schemes: Option<Vec<String>>,
    config: Option<&str>,
    overrides: Vec<String>,
    jobs: usize,
) -> PyResult<Vec<Bound<'py, PyAny>>> {
    let axis: Axis = parse(axis)?;
    let cfg = match config {
        Some(text) => ExperimentConfig::from_toml(text, &overrides),
        None => ExperimentConfig::load(None, &overrides),
    }
    .map_err(py_err)?;
    let mut spec = SweepSpec::new(axis, seeds);
    if let Some(v) = values {
        spec.values = v;
    }
    if let Some(names) = schemes {
        spec.schemes = names.iter().map(|n| parse(n)).collect::<PyResult<_>>()?;
    }
    let rows = py.detach(|| run_sweep(&cfg, &spec, jobs)).map_err(py_err)?;
    let json = py.import("json")?;
    rows.iter()
        .map(|r| json.call_method1("loads", (serde_json::to_string(r).expect("rows serialize"),)))
        .collect()
}

#[pymodule]
fn cogwpt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CogwptError", m.py().get_type::<CogwptError>())?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(waterfill, m)?)?;
    m.add_function(wrap_pyfunction!(received_power, m)?)?;
    m.add_function(wrap_pyfunction!(water_level_range, m)?)?;
    m.add_function(wrap_pyfunction!(level_feasible, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
