//! Residual-form primal-dual Newton solver for equality-constrained saddle
//! problems.
//!
//! The residual is `r = [∇f_t + Aᵀλ; Az − b]` and the Newton step solves
//! `T Δw = −r` with `T = [[∇²f_t, Aᵀ], [A, 0]]`. `T` is indefinite (concave in
//! `x`, convex in `y`), so it is factored with LU and partial pivoting. Steps are
//! accepted by backtracking on `‖r‖`; trial points outside the barrier domain
//! count as an infinite residual.
//!
//! When `R` is close to singular the saddle can be nearly flat in some `K`
//! directions. The Newton step then moves far along them and the residual grows
//! quadratically in the step length, so plain backtracking settles for tiny
//! steps. In that case the search also tries the arc `sΔw + s²Δw₂` with
//! `T Δw₂ = −r(w + Δw)`, which cancels the quadratic term. Both searches use the
//! same acceptance test.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::channel::SaddleState;
use crate::config::SolverConfig;
use crate::error::{Result, SolverError};
use crate::trace::{ConvergenceTrace, TraceRow};

/// Condition estimates above this are treated as a singular KKT matrix.
pub const MAX_CONDITION: f64 = 1e14;
/// Largest relative backward error accepted from the linear solve.
pub const MAX_BACKWARD_ERROR: f64 = 1e-10;
/// Plain steps shorter than this also try the corrected arc.
pub const CORRECTION_THRESHOLD: f64 = 0.5;

/// A smooth saddle objective `f_t(x, y)` (concave in `x`, convex in `y`) with an
/// optional single linear equality `aᵀz = b`.
pub trait BarrierProblem {
    fn x_len(&self) -> usize;
    fn y_len(&self) -> usize;
    fn t(&self) -> f64;
    /// Equality row over `z = [x; y]` and its right-hand side.
    fn equality(&self) -> Option<(&DVector<f64>, f64)>;
    /// `∇f_t(z)`, or a domain error outside the interior.
    fn gradient(&self, z: &DVector<f64>) -> Result<DVector<f64>>;
    fn gradient_hessian(&self, z: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)>;
    /// Upper bound and secrecy rate at `z`, in nats, for traces.
    fn rates(&self, z: &DVector<f64>) -> Result<(f64, f64)>;

    fn z_len(&self) -> usize {
        self.x_len() + self.y_len()
    }
}

#[derive(Debug, Clone)]
pub struct KktSystem {
    pub residual: DVector<f64>,
    pub kkt_matrix: DMatrix<f64>,
}

impl KktSystem {
    pub fn residual_norm(&self) -> f64 {
        self.residual.norm()
    }

    /// `‖T − Tᵀ‖∞`.
    pub fn asymmetry(&self) -> f64 {
        (&self.kkt_matrix - self.kkt_matrix.transpose()).amax()
    }
}

fn residual_from_gradient<P: BarrierProblem + ?Sized>(
    problem: &P,
    z: &DVector<f64>,
    lambda: f64,
    grad: DVector<f64>,
) -> DVector<f64> {
    match problem.equality() {
        Some((a, b)) => {
            let n = grad.len();
            let mut r = DVector::zeros(n + 1);
            r.rows_mut(0, n).copy_from(&(grad + a * lambda));
            r[n] = a.dot(z) - b;
            r
        }
        None => grad,
    }
}

/// Residual at `state`; domain errors propagate.
pub fn residual<P: BarrierProblem + ?Sized>(problem: &P, state: &SaddleState) -> Result<DVector<f64>> {
    let z = state.z();
    let g = problem.gradient(&z)?;
    Ok(residual_from_gradient(problem, &z, state.lambda, g))
}

/// Residual vector and KKT matrix at `state`.
pub fn assemble<P: BarrierProblem + ?Sized>(problem: &P, state: &SaddleState) -> Result<KktSystem> {
    let z = state.z();
    let (g, hess) = problem.gradient_hessian(&z)?;
    let residual = residual_from_gradient(problem, &z, state.lambda, g);
    let n = problem.z_len();
    let kkt_matrix = match problem.equality() {
        Some((a, _)) => {
            let mut t = DMatrix::zeros(n + 1, n + 1);
            t.view_mut((0, 0), (n, n)).copy_from(&hess);
            t.view_mut((0, n), (n, 1)).copy_from(a);
            t.view_mut((n, 0), (1, n)).copy_from(&a.transpose());
            t
        }
        None => hess,
    };
    Ok(KktSystem { residual, kkt_matrix })
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Hager's estimate of `‖T⁻¹‖₁` from an existing LU factorization of a
/// symmetric `T` (so transposed solves are plain solves).
fn inverse_one_norm_estimate(lu: &LU<f64, Dyn, Dyn>, n: usize) -> Option<f64> {
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut estimate = 0.0;
    for _ in 0..5 {
        let y = lu.solve(&x)?;
        estimate = y.iter().map(|v| v.abs()).sum::<f64>();
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let z = lu.solve(&xi)?;
        let (j, zmax) = z.iter().enumerate().fold((0, 0.0), |acc, (i, v)| {
            if v.abs() > acc.1 { (i, v.abs()) } else { acc }
        });
        if zmax <= z.dot(&x) {
            break;
        }
        x = DVector::zeros(n);
        x[j] = 1.0;
    }
    Some(estimate)
}

/// 1-norm condition estimate of a symmetric matrix.
pub fn condition_estimate(t: &DMatrix<f64>) -> f64 {
    let lu = t.clone().lu();
    inverse_one_norm_estimate(&lu, t.nrows()).map_or(f64::INFINITY, |inv| inv * one_norm(t))
}

/// Solves `T Δw = −r` by LU with partial pivoting (one refinement pass if the
/// backward error is above [`MAX_BACKWARD_ERROR`]).
pub fn newton_step(sys: &KktSystem) -> Result<DVector<f64>> {
    let t = &sys.kkt_matrix;
    let n = t.nrows();
    let rhs = -&sys.residual;
    if rhs.iter().all(|&v| v == 0.0) {
        return Ok(DVector::zeros(n));
    }
    let lu = t.clone().lu();
    let singular = || SolverError::SingularKkt { condition: f64::INFINITY };
    let inv_norm = inverse_one_norm_estimate(&lu, n).ok_or_else(singular)?;
    let condition = inv_norm * one_norm(t);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(SolverError::SingularKkt { condition });
    }
    let mut dw = lu.solve(&rhs).ok_or_else(singular)?;
    let backward = |dw: &DVector<f64>| {
        let res = t * dw - &rhs;
        res.amax() / (t.amax() * n as f64 * dw.amax() + rhs.amax())
    };
    let mut err = backward(&dw);
    if err > MAX_BACKWARD_ERROR {
        let correction = lu.solve(&(&rhs - t * &dw)).ok_or_else(singular)?;
        dw += correction;
        err = backward(&dw);
    }
    if err > MAX_BACKWARD_ERROR || dw.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::InaccurateSolve { backward_error: err });
    }
    Ok(dw)
}

fn shifted(state: &SaddleState, dw: &DVector<f64>, s: f64, nx: usize, with_lambda: bool) -> SaddleState {
    let n = state.x.len() + state.y.len();
    let z = state.z() + dw.rows(0, n) * s;
    let lambda = if with_lambda { state.lambda + s * dw[n] } else { state.lambda };
    SaddleState::from_z(&z, nx, lambda)
}

/// Result of a successful backtracking search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome {
    pub step: f64,
    pub residual_norm: f64,
    /// Trial points rejected for leaving the barrier domain.
    pub exterior_trials: usize,
}

/// Backtracking on the residual norm: the largest `s ∈ {1, β, β², …}` with
/// `‖r(w + sΔw)‖ ≤ (1 − αs)‖r(w)‖` whose trial point stays interior.
/// Callers must not invoke it at a zero residual.
pub fn line_search<P: BarrierProblem + ?Sized>(
    problem: &P,
    state: &SaddleState,
    dw: &DVector<f64>,
    alpha: f64,
    beta: f64,
    s_min: f64,
) -> Result<LineSearchOutcome> {
    if !(alpha > 0.0 && alpha < 0.5 && beta > 0.0 && beta < 1.0) {
        return Err(SolverError::InvalidInput(format!(
            "line search needs 0 < alpha < 1/2 and 0 < beta < 1, got {alpha}, {beta}"
        )));
    }
    let r0 = residual(problem, state)?.norm();
    let with_lambda = problem.equality().is_some();
    let mut s = 1.0;
    let mut exterior_trials = 0;
    loop {
        let trial = shifted(state, dw, s, problem.x_len(), with_lambda);
        match residual(problem, &trial) {
            Ok(r) => {
                let rn = r.norm();
                if rn <= (1.0 - alpha * s) * r0 {
                    return Ok(LineSearchOutcome { step: s, residual_norm: rn, exterior_trials });
                }
            }
            Err(SolverError::Domain(_)) => exterior_trials += 1,
            Err(e) => return Err(e),
        }
        s *= beta;
        if s < s_min {
            log::debug!("line search stalled at residual {r0:.3e} ({exterior_trials} exterior trials)");
            return Err(SolverError::LineSearch { step: s, residual: r0 });
        }
    }
}

/// Backtracking along `sΔw + s²Δw₂` for steps `s > floor`. Returns the accepted
/// step, the full displacement and the new residual norm, or `None` when the
/// arc is unavailable or no better than `floor`.
fn corrected_search<P: BarrierProblem + ?Sized>(
    problem: &P,
    state: &SaddleState,
    sys: &KktSystem,
    dw: &DVector<f64>,
    floor: f64,
    cfg: &SolverConfig,
) -> Result<Option<(f64, DVector<f64>, f64)>> {
    let with_lambda = problem.equality().is_some();
    let r1 = match residual(problem, &shifted(state, dw, 1.0, problem.x_len(), with_lambda)) {
        Ok(r) => r,
        Err(SolverError::Domain(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let dw2 = match newton_step(&KktSystem { residual: r1, kkt_matrix: sys.kkt_matrix.clone() }) {
        Ok(d) => d,
        Err(SolverError::SingularKkt { .. } | SolverError::InaccurateSolve { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let r0 = sys.residual_norm();
    let mut s = 1.0;
    while s > floor {
        let path = dw * s + &dw2 * (s * s);
        match residual(problem, &shifted(state, &path, 1.0, problem.x_len(), with_lambda)) {
            Ok(r) if r.norm() <= (1.0 - cfg.alpha * s) * r0 => return Ok(Some((s, path, r.norm()))),
            Ok(_) | Err(SolverError::Domain(_)) => {}
            Err(e) => return Err(e),
        }
        s *= cfg.beta;
    }
    Ok(None)
}

#[derive(Debug, Clone, Default)]
pub struct NewtonReport {
    pub iterations: usize,
    pub final_residual_norm: f64,
    /// Residual norms, starting with the initial point.
    pub residual_history: Vec<f64>,
    pub step_sizes: Vec<f64>,
    pub converged: bool,
    /// Why the solve stopped early, if it did.
    pub failure: Option<String>,
    pub trace: ConvergenceTrace,
}

/// Newton iterations at a fixed barrier parameter until `‖r‖ ≤ eps_newton` or
/// `max_iter` steps. Line-search stalls and iteration exhaustion come back as a
/// non-converged report; a singular KKT matrix or a non-interior start is an error.
pub fn newton_solve<P: BarrierProblem + ?Sized>(
    problem: &P,
    start: SaddleState,
    cfg: &SolverConfig,
) -> Result<(SaddleState, NewtonReport)> {
    let mut state = start;
    let mut report = NewtonReport::default();
    let mut rnorm = residual(problem, &state)?.norm();
    report.residual_history.push(rnorm);
    let with_lambda = problem.equality().is_some();
    while rnorm > cfg.eps_newton {
        if report.iterations >= cfg.max_iter {
            report.failure = Some(format!("iteration limit {} reached", cfg.max_iter));
            break;
        }
        let sys = assemble(problem, &state)?;
        let dw = newton_step(&sys)?;
        let plain = match line_search(problem, &state, &dw, cfg.alpha, cfg.beta, cfg.s_min) {
            Ok(o) => Some(o),
            Err(SolverError::LineSearch { .. }) => None,
            Err(e) => return Err(e),
        };
        let floor = plain.map_or(0.0, |o| o.step);
        let arc = if floor < CORRECTION_THRESHOLD {
            corrected_search(problem, &state, &sys, &dw, floor.max(cfg.s_min), cfg)?
        } else {
            None
        };
        let (step, next) = match (arc, plain) {
            (Some((s, path, rn)), _) => {
                state = shifted(&state, &path, 1.0, problem.x_len(), with_lambda);
                (s, rn)
            }
            (None, Some(o)) => {
                state = shifted(&state, &dw, o.step, problem.x_len(), with_lambda);
                (o.step, o.residual_norm)
            }
            (None, None) => {
                report.failure = Some(format!("line search stalled (residual {rnorm:.3e})"));
                break;
            }
        };
        rnorm = next;
        report.iterations += 1;
        report.residual_history.push(rnorm);
        report.step_sizes.push(step);
        let (f, c) = problem.rates(&state.z())?;
        report.trace.push(TraceRow {
            t: problem.t(),
            iter: report.iterations,
            residual: rnorm,
            f,
            c,
            step_size: step,
        });
    }
    report.final_residual_norm = rnorm;
    report.converged = rnorm <= cfg.eps_newton;
    Ok((state, report))
}
