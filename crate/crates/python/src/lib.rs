//! Python bindings. Matrices cross the boundary as row-major lists of lists;
//! rates are in nats.

use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use secrecy_core::io::{BatchSpec, ProblemFile, RunOutcome, SolverOverrides};
use secrecy_core::{
    classify_degraded, secrecy_rate, ChannelPair, DualTarget, PerAntennaBudget, SaddleSolution, SolveMode,
    SolverConfig, SolverError, SymMat,
};

create_exception!(secrecy, ConvergenceError, PyRuntimeError, "The solver stopped before converging.");

fn to_py(err: SolverError) -> PyErr {
    match err {
        SolverError::Shape(_) | SolverError::InvalidInput(_) | SolverError::Precondition(_) => {
            PyValueError::new_err(err.to_string())
        }
        _ => ConvergenceError::new_err(err.to_string()),
    }
}

fn matrix(rows: &[Vec<f64>], name: &str) -> PyResult<DMatrix<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err(format!("{name} must be a non-empty rectangular list of rows")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn solve_mode(mode: &str) -> PyResult<SolveMode> {
    match mode {
        "auto" => Ok(SolveMode::Auto),
        "minimax" => Ok(SolveMode::Minimax),
        "degraded" => Ok(SolveMode::Degraded),
        other => Err(PyValueError::new_err(format!("unknown mode {other:?} (auto, minimax or degraded)"))),
    }
}

/// Solver settings. Unset keyword arguments keep the defaults.
#[pyclass(name = "SolverConfig", module = "secrecy")]
#[derive(Clone)]
struct PyConfig {
    inner: SolverConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (*, alpha=None, beta=None, t0=None, mu=None, t_max=None, eps_gap=None, eps_newton=None, max_iter=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        alpha: Option<f64>,
        beta: Option<f64>,
        t0: Option<f64>,
        mu: Option<f64>,
        t_max: Option<f64>,
        eps_gap: Option<f64>,
        eps_newton: Option<f64>,
        max_iter: Option<usize>,
    ) -> PyResult<Self> {
        let o = SolverOverrides { alpha, beta, t0, mu, t_max, eps_gap, eps_newton, max_iter };
        let inner = o.apply(SolverConfig::default());
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }
    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }
    #[getter]
    fn t0(&self) -> f64 {
        self.inner.t0
    }
    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }
    #[getter]
    fn t_max(&self) -> f64 {
        self.inner.t_max
    }
    #[getter]
    fn eps_gap(&self) -> f64 {
        self.inner.eps_gap
    }
    #[getter]
    fn eps_newton(&self) -> f64 {
        self.inner.eps_newton
    }
    #[getter]
    fn max_iter(&self) -> usize {
        self.inner.max_iter
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "SolverConfig(alpha={}, beta={}, t0={}, mu={}, t_max={}, eps_gap={}, eps_newton={}, max_iter={})",
            c.alpha, c.beta, c.t0, c.mu, c.t_max, c.eps_gap, c.eps_newton, c.max_iter
        )
    }
}

fn config(cfg: Option<PyConfig>) -> SolverConfig {
    cfg.map_or_else(SolverConfig::default, |c| c.inner)
}

/// Legitimate channel `H1` (n1 × m) and eavesdropper channel `H2` (n2 × m).
#[pyclass(name = "Channel", module = "secrecy", frozen)]
struct PyChannel {
    inner: ChannelPair,
}

#[pymethods]
impl PyChannel {
    #[new]
    fn new(h1: Vec<Vec<f64>>, h2: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = ChannelPair::new(matrix(&h1, "H1")?, matrix(&h2, "H2")?).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }
    #[getter]
    fn n1(&self) -> usize {
        self.inner.n1()
    }
    #[getter]
    fn n2(&self) -> usize {
        self.inner.n2()
    }

    /// `("degraded" | "reversely_degraded" | "indefinite", eig(W1 − W2) descending)`.
    fn classify(&self) -> (&'static str, Vec<f64>) {
        let c = classify_degraded(&self.inner);
        let name = match c.class {
            secrecy_core::Degradedness::Degraded => "degraded",
            secrecy_core::Degradedness::ReverselyDegraded => "reversely_degraded",
            secrecy_core::Degradedness::Indefinite => "indefinite",
        };
        (name, c.eigenvalues)
    }

    /// `½ ln(|I + W1 R| / |I + W2 R|)` for a positive semidefinite `R`.
    fn secrecy_rate(&self, r: Vec<Vec<f64>>) -> PyResult<f64> {
        let r = SymMat::new(matrix(&r, "R")?).map_err(to_py)?;
        if r.dim() != self.inner.m() {
            return Err(PyValueError::new_err(format!("R must be {0} × {0}", self.inner.m())));
        }
        Ok(secrecy_rate(&self.inner, &r))
    }

    fn __repr__(&self) -> String {
        format!("Channel(m={}, n1={}, n2={})", self.inner.m(), self.inner.n1(), self.inner.n2())
    }
}

#[pyclass(name = "Solution", module = "secrecy", frozen)]
struct PySolution {
    inner: SaddleSolution,
}

#[pymethods]
impl PySolution {
    /// `minimax`, `degraded`, `per_antenna` or `zero_capacity`.
    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner.kind {
            secrecy_core::SolveKind::Minimax => "minimax",
            secrecy_core::SolveKind::Degraded => "degraded",
            secrecy_core::SolveKind::PerAntenna => "per_antenna",
            secrecy_core::SolveKind::ZeroCapacity => "zero_capacity",
        }
    }
    /// Achievable rate `C(R*)` clamped at zero.
    #[getter]
    fn capacity(&self) -> f64 {
        self.inner.capacity_achievable
    }
    #[getter]
    fn capacity_bits(&self) -> f64 {
        self.inner.capacity_bits()
    }
    /// `f(R*, K*)`.
    #[getter]
    fn capacity_upper(&self) -> f64 {
        self.inner.capacity_upper
    }
    #[getter]
    fn gap_bound(&self) -> f64 {
        self.inner.gap_bound
    }
    #[getter]
    fn gap_bound_heuristic(&self) -> bool {
        self.inner.gap_bound_heuristic
    }
    #[getter]
    fn power(&self) -> f64 {
        self.inner.power
    }
    #[getter]
    fn r_star(&self) -> Vec<Vec<f64>> {
        rows(self.inner.r_star.as_matrix())
    }
    /// `R*` with barrier-sized eigenvalues set to zero.
    #[getter]
    fn r_star_rounded(&self) -> Vec<Vec<f64>> {
        rows(self.inner.rounded_r_star().as_matrix())
    }
    #[getter]
    fn k21_star(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.k21_star)
    }
    /// Power multiplier `λ ≥ 0`.
    #[getter]
    fn lambda_(&self) -> f64 {
        -self.inner.lambda_star
    }
    #[getter]
    fn t_final(&self) -> f64 {
        self.inner.t_final
    }
    #[getter]
    fn final_residual(&self) -> f64 {
        self.inner.final_residual
    }
    #[getter]
    fn newton_steps(&self) -> usize {
        self.inner.newton_steps()
    }
    /// `[(t, steps)]` per barrier stage.
    #[getter]
    fn stages(&self) -> Vec<(f64, usize)> {
        self.inner.stages.clone()
    }
    /// `[(t, iter, residual, f, C, step_size)]`, one tuple per Newton step.
    #[getter]
    fn trace(&self) -> Vec<(f64, usize, f64, f64, f64, f64)> {
        self.inner.trace.rows.iter().map(|r| (r.t, r.iter, r.residual, r.f, r.c, r.step_size)).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(kind={:?}, capacity={:.8}, gap_bound={:.2e}, newton_steps={})",
            self.kind(),
            self.inner.capacity_achievable,
            self.inner.gap_bound,
            self.inner.newton_steps()
        )
    }
}

/// Secrecy capacity under `tr R ≤ power`.
#[pyfunction]
#[pyo3(signature = (channel, power, mode="auto", config=None))]
fn solve(py: Python<'_>, channel: &PyChannel, power: f64, mode: &str, config: Option<PyConfig>) -> PyResult<PySolution> {
    let mode = solve_mode(mode)?;
    let cfg = self::config(config);
    let inner = py.allow_threads(|| secrecy_core::solve(&channel.inner, power, mode, &cfg)).map_err(to_py)?;
    Ok(PySolution { inner })
}

/// Secrecy capacity under per-antenna caps `r_ii ≤ caps[i]`, optionally with a total cap.
#[pyfunction]
#[pyo3(signature = (channel, caps, total=None, config=None))]
fn solve_per_antenna(
    py: Python<'_>,
    channel: &PyChannel,
    caps: Vec<f64>,
    total: Option<f64>,
    config: Option<PyConfig>,
) -> PyResult<PySolution> {
    let budget = PerAntennaBudget::new(caps, total).map_err(to_py)?;
    let cfg = self::config(config);
    let inner = py.allow_threads(|| secrecy_core::solve_per_antenna(&channel.inner, &budget, &cfg)).map_err(to_py)?;
    Ok(PySolution { inner })
}

/// Minimum power reaching secrecy rate `rate` (nats). Returns `(power, solution)`.
#[pyfunction]
#[pyo3(signature = (channel, rate, p_hi=None, config=None))]
fn solve_dual(
    py: Python<'_>,
    channel: &PyChannel,
    rate: f64,
    p_hi: Option<f64>,
    config: Option<PyConfig>,
) -> PyResult<(f64, PySolution)> {
    let mut target = DualTarget::new(rate).map_err(to_py)?;
    target.p_hi = p_hi;
    let cfg = self::config(config);
    let d = py.allow_threads(|| secrecy_core::solve_dual(&channel.inner, &target, &cfg)).map_err(to_py)?;
    Ok((d.power, PySolution { inner: d.solution }))
}

/// Solves a problem file; returns `(converged, result_json)`.
#[pyfunction]
fn solve_file(py: Python<'_>, path: std::path::PathBuf) -> PyResult<(bool, String)> {
    let outcome = py
        .allow_threads(|| {
            ProblemFile::read(&path).and_then(|p| secrecy_core::io::run_problem(&p, &SolverOverrides::default(), None, None))
        })
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((matches!(outcome, RunOutcome::Converged(_)), outcome.result().to_json()))
}

/// Seeded random-channel batch; returns the summary as JSON.
#[pyfunction]
#[pyo3(signature = (m, n1, n2, count, seed, power=10.0, jobs=0, config=None))]
#[allow(clippy::too_many_arguments)]
fn batch(
    py: Python<'_>,
    m: usize,
    n1: usize,
    n2: usize,
    count: usize,
    seed: u64,
    power: f64,
    jobs: usize,
    config: Option<PyConfig>,
) -> PyResult<String> {
    if m == 0 || n1 == 0 || n2 == 0 || count == 0 {
        return Err(PyValueError::new_err("m, n1, n2 and count must be at least 1"));
    }
    let spec = BatchSpec { m, n1, n2, count, seed, power, mode: SolveMode::Minimax, config: self::config(config) };
    let summary = py.allow_threads(|| secrecy_core::io::run_batch(&spec, jobs)).map_err(to_py)?;
    Ok(summary.to_json())
}

#[pymodule]
fn secrecy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyChannel>()?;
    m.add_class::<PySolution>()?;
    m.add("ConvergenceError", m.py().get_type::<ConvergenceError>())?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_per_antenna, m)?)?;
    m.add_function(wrap_pyfunction!(solve_dual, m)?)?;
    m.add_function(wrap_pyfunction!(solve_file, m)?)?;
    m.add_function(wrap_pyfunction!(batch, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(matrix(&[vec![1.0, 2.0], vec![3.0]], "H1").is_err());
        assert!(matrix(&[], "H1").is_err());
    }

    #[test]
    fn rows_round_trip() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(matrix(&rows(&m), "M").unwrap(), m);
    }

    #[test]
    fn module_solves_from_python() {
        pyo3::append_to_inittab!(secrecy);
        Python::with_gil(|py| {
            let code = c"
import secrecy
ch = secrecy.Channel([[2.0]], [[1.0]])
sol = secrecy.solve(ch, 1.0)
err = abs(sol.capacity_upper - 0.5 * __import__('math').log(2.5))
kind = sol.kind
bad_mode = False
try:
    secrecy.solve(ch, 1.0, mode='nope')
except ValueError:
    bad_mode = True
";
            let locals = pyo3::types::PyDict::new(py);
            py.run(code, None, Some(&locals)).unwrap();
            let err: f64 = locals.get_item("err").unwrap().unwrap().extract().unwrap();
            assert!(err < 1e-4, "{err}");
            let kind: String = locals.get_item("kind").unwrap().unwrap().extract().unwrap();
            assert_eq!(kind, "degraded");
            assert!(locals.get_item("bad_mode").unwrap().unwrap().extract::<bool>().unwrap());
        });
    }
}
