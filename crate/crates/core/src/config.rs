use serde::{Deserialize, Serialize};

use crate::barrier_solver::BarrierSchedule;
use crate::error::{Result, SolverError};

/// Line-search, barrier schedule and tolerance settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Accepted fraction of the linear residual decrease, in (0, 1/2).
    pub alpha: f64,
    /// Step shrink factor, in (0, 1).
    pub beta: f64,
    pub t0: f64,
    pub mu: f64,
    pub t_max: f64,
    /// Stop once the gap bound drops to this value.
    pub eps_gap: f64,
    /// Residual tolerance of each inner Newton solve.
    pub eps_newton: f64,
    pub max_iter: usize,
    pub s_min: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            beta: 0.5,
            t0: 100.0,
            mu: 10.0,
            t_max: 1e5,
            eps_gap: 1e-4,
            eps_newton: 1e-10,
            max_iter: 200,
            s_min: 1e-12,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(SolverError::InvalidInput(what.to_string()));
        let all_finite = [self.alpha, self.beta, self.t0, self.mu, self.t_max, self.eps_gap, self.eps_newton, self.s_min]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return bad("solver settings must be finite");
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return bad("alpha must lie in (0, 0.5)");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta must lie in (0, 1)");
        }
        if !(self.t0 > 0.0) || !(self.mu > 1.0) || self.t_max < self.t0 {
            return bad("barrier schedule needs t0 > 0, mu > 1 and t_max >= t0");
        }
        if !(self.eps_newton > 0.0) || self.eps_gap < 0.0 || self.max_iter == 0 || !(self.s_min > 0.0) {
            return bad("tolerances must be positive");
        }
        Ok(())
    }

    pub fn schedule(&self) -> BarrierSchedule {
        BarrierSchedule { t0: self.t0, mu: self.mu, t_max: self.t_max, eps_gap: self.eps_gap }
    }
}
