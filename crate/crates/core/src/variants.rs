//! Per-antenna power caps and the dual problem (least total power for a target
//! secrecy rate).

use nalgebra::DMatrix;

use crate::barrier_solver::{heuristic_gap_bound, run_barrier, solve, SaddleSolution, SolveKind, SolveMode};
use crate::channel::{ChannelPair, SaddleState};
use crate::config::SolverConfig;
use crate::error::{Result, SolverError};
use crate::matcalc::SymMat;
use crate::objective::{raw_minimax, secrecy_rate, BarrierObjective, PowerCaps};

/// Per-antenna caps `r_ii ≤ P_i`, optionally with a total cap.
#[derive(Debug, Clone, PartialEq)]
pub struct PerAntennaBudget {
    pub per_antenna: Vec<f64>,
    pub total: Option<f64>,
}

impl PerAntennaBudget {
    pub fn new(per_antenna: Vec<f64>, total: Option<f64>) -> Result<Self> {
        if per_antenna.is_empty() || per_antenna.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(SolverError::InvalidInput("per-antenna caps must be positive".into()));
        }
        if let Some(p) = total {
            if !(p > 0.0) || !p.is_finite() {
                return Err(SolverError::InvalidInput(format!("total cap must be positive, got {p}")));
            }
        }
        Ok(Self { per_antenna, total })
    }

    /// A total cap at or above `Σ P_i` never binds.
    pub fn total_is_vacuous(&self) -> bool {
        self.total.is_some_and(|p| p >= self.per_antenna.iter().sum::<f64>())
    }

    fn caps(&self) -> PowerCaps {
        PowerCaps { per_antenna: self.per_antenna.clone(), total: self.total }
    }

    /// `diag(P_i/2)`, scaled down so the trace stays at most half the total cap.
    fn start(&self) -> SymMat {
        let sum: f64 = self.per_antenna.iter().sum();
        let scale = self.total.map_or(1.0, |p| (p / sum).min(1.0));
        let diag = nalgebra::DVector::from_iterator(self.per_antenna.len(), self.per_antenna.iter().map(|p| 0.5 * p * scale));
        SymMat::symmetrized(DMatrix::from_diagonal(&diag))
    }
}

/// Minimax barrier method with the caps as barrier terms and no equality row.
pub fn solve_per_antenna(ch: &ChannelPair, budget: &PerAntennaBudget, cfg: &SolverConfig) -> Result<SaddleSolution> {
    if budget.per_antenna.len() != ch.m() {
        return Err(SolverError::Shape(format!(
            "{} per-antenna caps for {} transmit antennas",
            budget.per_antenna.len(),
            ch.m()
        )));
    }
    if budget.total_is_vacuous() {
        log::warn!("total power cap is not below the sum of per-antenna caps and never binds");
    }
    let caps = budget.caps();
    let base = BarrierObjective::with_caps(ch, cfg.t0, caps.clone())?;
    let start = SaddleState::new(&budget.start(), &DMatrix::zeros(ch.n2(), ch.n1()), 0.0);
    let gap_dim = ch.m() + caps.term_count() + ch.n();
    let run = run_barrier(|t| base.at(t), start, cfg, gap_dim)?;
    let r_star = run.state.r();
    let k21_star = run.state.k21(ch.n1(), ch.n2());
    let c = secrecy_rate(ch, &r_star);
    Ok(SaddleSolution {
        kind: SolveKind::PerAntenna,
        power: r_star.trace(),
        capacity_upper: 0.5 * raw_minimax(ch, r_star.as_matrix(), &k21_star)?,
        capacity_achievable: c.max(0.0),
        gap_bound: heuristic_gap_bound(ch, &caps, run.t_final),
        gap_bound_heuristic: true,
        lambda_star: 0.0,
        t_final: run.t_final,
        final_residual: run.final_residual,
        stages: run.stages,
        trace: run.trace,
        k21_star,
        r_star,
    })
}

/// Target rate for the dual problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualTarget {
    /// Required secrecy rate in nats.
    pub rate: f64,
    /// Upper end of the power bracket; found by doubling from 1 when absent.
    pub p_hi: Option<f64>,
    pub tol_rate: f64,
}

impl DualTarget {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(SolverError::InvalidInput(format!("target rate must be positive, got {rate}")));
        }
        Ok(Self { rate, p_hi: None, tol_rate: 1e-9 })
    }
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    pub power: f64,
    pub solution: SaddleSolution,
    /// Every `(P, Cs(P))` evaluated, in evaluation order.
    pub evaluations: Vec<(f64, f64)>,
}

const MAX_BRACKET: f64 = (1u64 << 40) as f64;

/// Solves at power `p` through the channel scaled by `√p` at unit power. The
/// central path is the same (`ln|pR| = m ln p + ln|R|`), but the iterates stay
/// O(1) for any `p`, which keeps the KKT matrix well conditioned when the
/// bisection probes tiny powers. `R*` and `λ` are mapped back; rates and the
/// trace's `f`, `C` columns are unchanged, its residuals are those of the scaled
/// problem.
fn solve_at_power(ch: &ChannelPair, p: f64, cfg: &SolverConfig) -> Result<SaddleSolution> {
    let s = p.sqrt();
    let scaled = ChannelPair::new(ch.h1() * s, ch.h2() * s)?;
    let mut sol = solve(&scaled, 1.0, SolveMode::Auto, cfg)?;
    sol.r_star = SymMat::symmetrized(sol.r_star.as_matrix() * p);
    sol.power = p;
    sol.lambda_star /= p;
    Ok(sol)
}

/// Least total power reaching `target.rate`, by bisection on the power budget
/// using the monotone map `P ↦ Cs(P)`.
pub fn solve_dual(ch: &ChannelPair, target: &DualTarget, cfg: &SolverConfig) -> Result<DualSolution> {
    if !(target.rate > 0.0) {
        return Err(SolverError::InvalidInput(format!("target rate must be positive, got {}", target.rate)));
    }
    let mut evaluations = Vec::new();
    let mut eval = |p: f64| -> Result<(f64, SaddleSolution)> {
        let sol = solve_at_power(ch, p, cfg)?;
        let cs = sol.capacity_upper.max(0.0);
        evaluations.push((p, cs));
        Ok((cs, sol))
    };

    let (mut hi, (mut hi_rate, mut hi_sol)) = match target.p_hi {
        Some(p) => (p, eval(p)?),
        None => {
            let mut p = 1.0;
            loop {
                let e = eval(p)?;
                if e.0 >= target.rate || p >= MAX_BRACKET {
                    break (p, e);
                }
                p *= 2.0;
            }
        }
    };
    if hi_rate < target.rate {
        return Err(SolverError::BracketInvalid { power: hi, rate: hi_rate, target: target.rate });
    }
    let mut lo = 0.0;
    while (hi_rate - target.rate).abs() > target.tol_rate && hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        let (rate, sol) = eval(mid)?;
        if rate >= target.rate {
            (hi, hi_rate, hi_sol) = (mid, rate, sol);
        } else {
            lo = mid;
        }
    }
    // tr R* = P on the total-power paths
    Ok(DualSolution { power: hi, solution: hi_sol, evaluations })
}
