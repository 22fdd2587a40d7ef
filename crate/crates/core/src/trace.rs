use serde::{Deserialize, Serialize};

/// One accepted Newton step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// Barrier parameter of the stage.
    pub t: f64,
    /// Step index within the stage, starting at 1.
    pub iter: usize,
    /// Residual norm after the step.
    pub residual: f64,
    /// Upper bound `f(R, K)` in nats.
    pub f: f64,
    /// Secrecy rate `C(R)` in nats (not clamped).
    #[serde(rename = "C")]
    pub c: f64,
    pub step_size: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub rows: Vec<TraceRow>,
}

impl ConvergenceTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: &ConvergenceTrace) {
        self.rows.extend_from_slice(&other.rows);
    }

    /// Newton steps per barrier stage, in stage order.
    pub fn steps_per_stage(&self) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for row in &self.rows {
            match out.last_mut() {
                Some((t, n)) if *t == row.t => *n += 1,
                _ => out.push((row.t, 1)),
            }
        }
        out
    }
}
