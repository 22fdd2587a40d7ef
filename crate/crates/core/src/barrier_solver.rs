//! Outer barrier loop: warm-started Newton solves over `t0, μt0, …`, gap-bound
//! stopping and KKT certificates for the solution.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::{classify_degraded, initial_point, ChannelPair, Degradedness, SaddleState};
use crate::config::SolverConfig;
use crate::error::{Result, SolverError};
use crate::kkt_newton::{newton_solve, BarrierProblem};
use crate::matcalc::SymMat;
use crate::objective::{secrecy_rate, BarrierObjective, DegradedObjective, PowerCaps};
use crate::trace::ConvergenceTrace;

/// Geometric barrier schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSchedule {
    pub t0: f64,
    pub mu: f64,
    pub t_max: f64,
    pub eps_gap: f64,
}

impl BarrierSchedule {
    /// `t0, μ·t0, …`, stopping at the first `t` with `gap_dim / t ≤ eps_gap` or at the
    /// last value not above `t_max`.
    pub fn stages(&self, gap_dim: usize) -> Vec<f64> {
        let mut ts = Vec::new();
        let mut t = self.t0;
        loop {
            ts.push(t);
            if gap_dim as f64 / t <= self.eps_gap || t * self.mu > self.t_max * (1.0 + 1e-12) {
                break;
            }
            t *= self.mu;
        }
        ts
    }
}

/// `max(m, n1 + n2) / t`.
pub fn gap_bound(m: usize, n1: usize, n2: usize, t: f64) -> f64 {
    m.max(n1 + n2) as f64 / t
}

/// `m / t`, the bound for the degraded fast path.
pub fn degraded_gap_bound(m: usize, t: f64) -> f64 {
    m as f64 / t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveKind {
    Minimax,
    Degraded,
    PerAntenna,
    /// Reversely degraded channel: zero capacity, no iterations.
    ZeroCapacity,
}

#[derive(Debug, Clone)]
pub struct SaddleSolution {
    pub kind: SolveKind,
    pub r_star: SymMat,
    pub power: f64,
    /// Zero for the degraded and zero-capacity paths.
    pub k21_star: DMatrix<f64>,
    /// Multiplier of the power equality as it appears in the residual
    /// (`∇f_t + λ_res·a`); the certificate reports `−λ_res`.
    pub lambda_star: f64,
    /// `f(R*, K*)` in nats. Equals `C(R*)` on the degraded path.
    pub capacity_upper: f64,
    /// `max(C(R*), 0)` in nats.
    pub capacity_achievable: f64,
    pub gap_bound: f64,
    /// Per-antenna bounds are heuristic.
    pub gap_bound_heuristic: bool,
    pub t_final: f64,
    pub final_residual: f64,
    /// Newton steps per barrier stage.
    pub stages: Vec<(f64, usize)>,
    pub trace: ConvergenceTrace,
}

impl SaddleSolution {
    pub fn newton_steps(&self) -> usize {
        self.stages.iter().map(|(_, n)| n).sum()
    }

    pub fn capacity_bits(&self) -> f64 {
        self.capacity_achievable / std::f64::consts::LN_2
    }

    /// `R*` with eigenvalues below `1e-9·P` set to zero.
    pub fn rounded_r_star(&self) -> SymMat {
        let eig = self.r_star.as_matrix().clone().symmetric_eigen();
        let floor = 1e-9 * self.power;
        let vals = eig.eigenvalues.map(|v| if v < floor { 0.0 } else { v });
        let r = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
        SymMat::symmetrized(r)
    }

    fn zero(ch: &ChannelPair, power: f64) -> Self {
        Self {
            kind: SolveKind::ZeroCapacity,
            r_star: SymMat::zeros(ch.m()),
            power,
            k21_star: DMatrix::zeros(ch.n2(), ch.n1()),
            lambda_star: 0.0,
            capacity_upper: 0.0,
            capacity_achievable: 0.0,
            gap_bound: 0.0,
            gap_bound_heuristic: false,
            t_final: f64::INFINITY,
            final_residual: 0.0,
            stages: Vec::new(),
            trace: ConvergenceTrace::default(),
        }
    }
}

pub(crate) struct BarrierRun {
    pub state: SaddleState,
    pub t_final: f64,
    pub final_residual: f64,
    pub stages: Vec<(f64, usize)>,
    pub trace: ConvergenceTrace,
}

/// Runs the warm-started schedule, building the stage problem with `problem_at`.
pub(crate) fn run_barrier<P, F>(problem_at: F, start: SaddleState, cfg: &SolverConfig, gap_dim: usize) -> Result<BarrierRun>
where
    P: BarrierProblem,
    F: Fn(f64) -> Result<P>,
{
    cfg.validate()?;
    let mut state = start;
    let mut trace = ConvergenceTrace::default();
    let mut stages = Vec::new();
    let mut final_residual = f64::NAN;
    let ts = cfg.schedule().stages(gap_dim);
    for &t in &ts {
        let problem = problem_at(t)?;
        let (next, report) = newton_solve(&problem, state, cfg)?;
        trace.extend(&report.trace);
        stages.push((t, report.iterations));
        log::debug!(
            "t = {t:.1e}: {} Newton steps, residual {:.3e}",
            report.iterations,
            report.final_residual_norm
        );
        if !report.converged {
            return Err(SolverError::NotConverged {
                t,
                residual: report.final_residual_norm,
                reason: report.failure.unwrap_or_else(|| "residual above tolerance".into()),
                trace: Box::new(trace),
            });
        }
        final_residual = report.final_residual_norm;
        state = next;
    }
    Ok(BarrierRun { state, t_final: *ts.last().expect("schedule is non-empty"), final_residual, stages, trace })
}

fn check_power(power: f64) -> Result<()> {
    if !(power > 0.0) || !power.is_finite() {
        return Err(SolverError::InvalidInput(format!("power must be positive, got {power}")));
    }
    Ok(())
}

/// The barrier keeps every eigenvalue of `R` at least of order `1/t`, so the
/// rank is counted above the geometric mean of `P` and `m/t`.
fn warn_on_rank(ch: &ChannelPair, r: &SymMat, power: f64, t: f64) {
    let class = classify_degraded(ch);
    let positive = class.eigenvalues.iter().filter(|&&e| e > class.tolerance).count();
    let floor = (power * ch.m() as f64 / t).sqrt();
    let rank = r.eigenvalues().iter().filter(|&&e| e > floor).count();
    if rank > positive {
        log::warn!("rank of R* ({rank}) exceeds the number of positive eigenvalues of W1 − W2 ({positive})");
    }
}

/// Secrecy capacity by the minimax barrier method with `tr R = P`.
pub fn solve_minimax(ch: &ChannelPair, power: f64, cfg: &SolverConfig) -> Result<SaddleSolution> {
    check_power(power)?;
    if classify_degraded(ch).class == Degradedness::ReverselyDegraded {
        return Ok(SaddleSolution::zero(ch, power));
    }
    let base = BarrierObjective::new(ch, cfg.t0, power)?;
    let start = initial_point(ch, power)?;
    let run = run_barrier(|t| base.at(t), start, cfg, ch.m().max(ch.n()))?;
    let r_star = run.state.r();
    let k21_star = run.state.k21(ch.n1(), ch.n2());
    let capacity_upper = 0.5 * crate::objective::raw_minimax(ch, r_star.as_matrix(), &k21_star)?;
    let c = secrecy_rate(ch, &r_star);
    warn_on_rank(ch, &r_star, power, run.t_final);
    Ok(SaddleSolution {
        kind: SolveKind::Minimax,
        power,
        k21_star,
        lambda_star: run.state.lambda,
        capacity_upper,
        capacity_achievable: c.max(0.0),
        gap_bound: gap_bound(ch.m(), ch.n1(), ch.n2(), run.t_final),
        gap_bound_heuristic: false,
        t_final: run.t_final,
        final_residual: run.final_residual,
        stages: run.stages,
        trace: run.trace,
        r_star,
    })
}

/// Barrier method on `C(R) + ln|R|/t` directly; only valid for `W1 ⪰ W2`.
pub fn solve_degraded(ch: &ChannelPair, power: f64, cfg: &SolverConfig) -> Result<SaddleSolution> {
    check_power(power)?;
    let class = classify_degraded(ch);
    if class.class != Degradedness::Degraded {
        return Err(SolverError::Precondition(format!(
            "degraded solver needs W1 ⪰ W2, eigenvalues of W1 − W2 are {:?}",
            class.eigenvalues
        )));
    }
    let base = DegradedObjective::new(ch, cfg.t0, power)?;
    let mut start = initial_point(ch, power)?;
    start.y = nalgebra::DVector::zeros(0);
    let run = run_barrier(|t| Ok(base.at(t)), start, cfg, ch.m())?;
    let r_star = run.state.r();
    let c = secrecy_rate(ch, &r_star);
    Ok(SaddleSolution {
        kind: SolveKind::Degraded,
        power,
        k21_star: DMatrix::zeros(ch.n2(), ch.n1()),
        lambda_star: run.state.lambda,
        capacity_upper: c,
        capacity_achievable: c.max(0.0),
        gap_bound: degraded_gap_bound(ch.m(), run.t_final),
        gap_bound_heuristic: false,
        t_final: run.t_final,
        final_residual: run.final_residual,
        stages: run.stages,
        trace: run.trace,
        r_star,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    #[default]
    Auto,
    Minimax,
    Degraded,
}

/// Dispatch on degradedness in `Auto` mode: degraded channels take the fast path,
/// reversely degraded ones return zero capacity, the rest go through the minimax solver.
pub fn solve(ch: &ChannelPair, power: f64, mode: SolveMode, cfg: &SolverConfig) -> Result<SaddleSolution> {
    match mode {
        SolveMode::Minimax => solve_minimax(ch, power, cfg),
        SolveMode::Degraded => solve_degraded(ch, power, cfg),
        SolveMode::Auto => match classify_degraded(ch).class {
            Degradedness::Degraded => solve_degraded(ch, power, cfg),
            Degradedness::ReverselyDegraded => {
                check_power(power)?;
                Ok(SaddleSolution::zero(ch, power))
            }
            Degradedness::Indefinite => solve_minimax(ch, power, cfg),
        },
    }
}

/// Recoverable KKT multipliers and stationarity residuals of a barrier solution.
///
/// The noise-side multipliers are not separated: the diagonal blocks of `∇_K f_t`
/// are what the block-diagonal multiplier absorbs, and `K⁻¹/t` plays the role of
/// the multiplier for `K ⪰ 0`. Only the off-diagonal block is certified.
#[derive(Debug, Clone)]
pub struct KktCertificate {
    /// Power multiplier, non-negative at an optimum with positive capacity.
    pub lambda: f64,
    /// `R⁻¹/t`, the barrier estimate of the multiplier for `R ⪰ 0`.
    pub m2_approx: DMatrix<f64>,
    /// `‖Z1 − Z2 + M2 − λI‖_F` (cap multipliers subtracted on the diagonal in cap mode).
    pub stationarity_residual_r: f64,
    /// Frobenius norm of both off-diagonal blocks of `∇_K f_t`.
    pub stationarity_residual_k: f64,
    /// `tr(M2·R)`, which equals `m/t`.
    pub complementarity_r: f64,
    /// Implied block-diagonal multiplier `−blockdiag(∇_K f_t)`.
    pub lambda_blocks: DMatrix<f64>,
    /// The multiplier for `K ⪰ 0` is not certified on its own.
    pub m1_certified: bool,
}

pub fn extract_certificate(sol: &SaddleSolution, obj: &BarrierObjective) -> Result<KktCertificate> {
    let ch = obj.channel();
    let m = ch.m();
    let t = sol.t_final;
    if sol.kind == SolveKind::ZeroCapacity {
        return Err(SolverError::Precondition("zero-capacity result has no barrier certificate".into()));
    }
    let r = &sol.r_star;
    let (z_diff, m2, grad_k) = match sol.kind {
        SolveKind::Degraded => {
            let z = |h: &DMatrix<f64>| {
                let n = h.nrows();
                let e = DMatrix::identity(n, n) + h * r.as_matrix() * h.transpose();
                let c = crate::channel::spd(&SymMat::symmetrized(e).into_matrix(), "I + H R Hᵀ")?;
                Ok::<_, SolverError>(h.transpose() * c.solve(h))
            };
            let chol_r = crate::channel::spd(r.as_matrix(), "R")?;
            let m2 = crate::channel::spd_inverse(&chol_r) / t;
            (z(ch.h1())? - z(ch.h2())?, m2, DMatrix::zeros(ch.n(), ch.n()))
        }
        _ => obj.at(t)?.matrix_gradients(r, &sol.k21_star)?,
    };
    let lambda = -sol.lambda_star;
    let mut stationary = &z_diff + &m2 - DMatrix::identity(m, m) * lambda;
    if let Some(caps) = obj.caps() {
        let total = caps.total.map_or(0.0, |p| 1.0 / (t * (p - r.trace())));
        for (i, p) in caps.per_antenna.iter().enumerate() {
            stationary[(i, i)] -= 1.0 / (t * (p - r.as_matrix()[(i, i)])) + total;
        }
    }
    let n1 = ch.n1();
    let off = grad_k.view((n1, 0), (ch.n2(), n1)).norm();
    let mut lambda_blocks = -grad_k.clone();
    lambda_blocks.view_mut((n1, 0), (ch.n2(), n1)).fill(0.0);
    lambda_blocks.view_mut((0, n1), (n1, ch.n2())).fill(0.0);
    Ok(KktCertificate {
        lambda,
        complementarity_r: (&m2 * r.as_matrix()).trace(),
        m2_approx: m2,
        stationarity_residual_r: stationary.norm(),
        stationarity_residual_k: std::f64::consts::SQRT_2 * off,
        lambda_blocks,
        m1_certified: false,
    })
}

/// Gap bound used for the per-antenna variant: `(m + caps + n1 + n2) / t`.
pub(crate) fn heuristic_gap_bound(ch: &ChannelPair, caps: &PowerCaps, t: f64) -> f64 {
    (ch.m() + caps.term_count() + ch.n()) as f64 / t
}
