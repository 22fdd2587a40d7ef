//! Problem and result files, the batch experiment harness and trace export.
//!
//! Files are JSON. Matrices are arrays of rows. Floats are written with the
//! shortest representation that parses back to the same bits, so results
//! round-trip exactly.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barrier_solver::{solve, SaddleSolution, SolveMode};
use crate::channel::{classify_degraded, matrix_to_rows, ChannelPair, Degradedness};
use crate::config::SolverConfig;
use crate::error::SolverError;
use crate::rng::NormalSource;
use crate::trace::TraceRow;
use crate::variants::{solve_dual, solve_per_antenna, DualTarget, PerAntennaBudget};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Power {
    Total(f64),
    PerAntenna(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemMode {
    #[default]
    Auto,
    Minimax,
    Degraded,
    PerAntenna,
    Dual,
}

/// Optional overrides of [`SolverConfig`] fields.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_newton: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

impl SolverOverrides {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    /// Fields set in `other` win.
    pub fn merged(&self, other: &SolverOverrides) -> SolverOverrides {
        SolverOverrides {
            alpha: other.alpha.or(self.alpha),
            beta: other.beta.or(self.beta),
            t0: other.t0.or(self.t0),
            mu: other.mu.or(self.mu),
            t_max: other.t_max.or(self.t_max),
            eps_gap: other.eps_gap.or(self.eps_gap),
            eps_newton: other.eps_newton.or(self.eps_newton),
            max_iter: other.max_iter.or(self.max_iter),
        }
    }

    pub fn apply(&self, base: SolverConfig) -> SolverConfig {
        SolverConfig {
            alpha: self.alpha.unwrap_or(base.alpha),
            beta: self.beta.unwrap_or(base.beta),
            t0: self.t0.unwrap_or(base.t0),
            mu: self.mu.unwrap_or(base.mu),
            t_max: self.t_max.unwrap_or(base.t_max),
            eps_gap: self.eps_gap.unwrap_or(base.eps_gap),
            eps_newton: self.eps_newton.unwrap_or(base.eps_newton),
            max_iter: self.max_iter.unwrap_or(base.max_iter),
            s_min: base.s_min,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(rename = "H1")]
    pub h1: Vec<Vec<f64>>,
    #[serde(rename = "H2")]
    pub h2: Vec<Vec<f64>>,
    /// Declared sizes, checked against the matrices when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n2: Option<usize>,
    pub power: Power,
    /// Total cap used together with per-antenna caps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_power: Option<f64>,
    #[serde(default)]
    pub mode: ProblemMode,
    #[serde(default, skip_serializing_if = "SolverOverrides::is_empty")]
    pub solver: SolverOverrides,
    /// Secrecy rate target in nats for `dual` mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_rate: Option<f64>,
}

/// Input problems found while reading or validating a problem file.
#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("malformed problem file (line {line}, column {column}): {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("field `{field}`: {message}")]
    Field { field: &'static str, message: String },
}

fn field(field: &'static str, message: impl Into<String>) -> InputError {
    InputError::Field { field, message: message.into() }
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self, InputError> {
        let p: ProblemFile = serde_json::from_str(text).map_err(|e| InputError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        p.validate()?;
        Ok(p)
    }

    pub fn read(path: &std::path::Path) -> Result<Self, InputError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| InputError::Read { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem file serializes")
    }

    pub fn validate(&self) -> Result<(), InputError> {
        let shape = |rows: &[Vec<f64>], name: &'static str| -> Result<usize, InputError> {
            let cols = rows.first().map_or(0, Vec::len);
            if rows.is_empty() || cols == 0 {
                return Err(field(name, "matrix is empty"));
            }
            if let Some(i) = rows.iter().position(|r| r.len() != cols) {
                return Err(field(name, format!("row {i} has {} entries, expected {cols}", rows[i].len())));
            }
            if rows.iter().flatten().any(|v| !v.is_finite()) {
                return Err(field(name, "non-finite entry"));
            }
            Ok(cols)
        };
        let c1 = shape(&self.h1, "H1")?;
        let c2 = shape(&self.h2, "H2")?;
        if c1 != c2 {
            return Err(field("H2", format!("column mismatch: H1 has {c1} columns, H2 has {c2}")));
        }
        let declared = [("m", self.m, c1), ("n1", self.n1, self.h1.len()), ("n2", self.n2, self.h2.len())];
        for (name, want, got) in declared {
            if let Some(w) = want {
                if w != got {
                    return Err(field(name, format!("declared {w}, matrices give {got}")));
                }
            }
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        match &self.power {
            Power::Total(p) if !positive(*p) => return Err(field("power", format!("must be positive, got {p}"))),
            Power::PerAntenna(ps) => {
                if ps.len() != c1 {
                    return Err(field("power", format!("{} per-antenna caps for {c1} antennas", ps.len())));
                }
                if !ps.iter().all(|p| positive(*p)) {
                    return Err(field("power", "per-antenna caps must be positive"));
                }
            }
            _ => {}
        }
        if let Some(p) = self.total_power {
            if !positive(p) {
                return Err(field("total_power", format!("must be positive, got {p}")));
            }
        }
        match (self.mode, &self.power) {
            (ProblemMode::PerAntenna, Power::Total(_)) => {
                return Err(field("power", "per_antenna mode needs a vector of caps"))
            }
            (ProblemMode::Auto | ProblemMode::Minimax | ProblemMode::Degraded | ProblemMode::Dual, Power::PerAntenna(_)) => {
                return Err(field("power", "a vector of caps needs mode per_antenna"))
            }
            _ => {}
        }
        if let Some(r) = self.target_rate {
            if !positive(r) {
                return Err(field("target_rate", format!("must be positive, got {r}")));
            }
        }
        let overrides_finite = [
            self.solver.alpha,
            self.solver.beta,
            self.solver.t0,
            self.solver.mu,
            self.solver.t_max,
            self.solver.eps_gap,
            self.solver.eps_newton,
        ]
        .iter()
        .flatten()
        .all(|v| v.is_finite());
        if !overrides_finite {
            return Err(field("solver", "overrides must be finite"));
        }
        Ok(())
    }

    pub fn channel(&self) -> Result<ChannelPair, SolverError> {
        ChannelPair::from_rows(&self.h1, &self.h2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    NotConverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub status: RunStatus,
    pub mode: String,
    pub channel_class: Degradedness,
    /// Achievable `C(R*)`, clamped at zero.
    pub capacity_nats: Option<f64>,
    pub capacity_bits: Option<f64>,
    /// `f(R*, K*)`.
    pub capacity_upper_nats: Option<f64>,
    pub gap_bound: Option<f64>,
    pub gap_bound_heuristic: bool,
    pub t_final: Option<f64>,
    /// Total transmit power `tr R*` (the minimized power in dual mode).
    pub power: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_rate: Option<f64>,
    #[serde(rename = "R_star")]
    pub r_star: Option<Vec<Vec<f64>>>,
    #[serde(rename = "K21_star")]
    pub k21_star: Option<Vec<Vec<f64>>>,
    /// Power multiplier, reported as `λ ≥ 0` (unhalved log-det units).
    pub lambda: Option<f64>,
    pub eigenvalues_r_star: Option<Vec<f64>>,
    #[serde(rename = "eigenvalues_W1_minus_W2")]
    pub eigenvalues_w1_minus_w2: Vec<f64>,
    pub newton_steps: usize,
    pub stage_steps: Vec<usize>,
    pub final_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub trace: Vec<TraceRow>,
    pub wall_time: f64,
    pub config: SolverConfig,
}

impl ResultFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result file serializes")
    }

    pub fn parse(text: &str) -> Result<Self, InputError> {
        serde_json::from_str(text).map_err(|e| InputError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    fn from_solution(sol: &SaddleSolution, class: &crate::channel::Classification, cfg: SolverConfig) -> Self {
        let ln2 = std::f64::consts::LN_2;
        let finite = |v: f64| v.is_finite().then_some(v);
        Self {
            status: RunStatus::Converged,
            mode: serde_json::to_value(sol.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            channel_class: class.class,
            capacity_nats: Some(sol.capacity_achievable),
            capacity_bits: Some(sol.capacity_achievable / ln2),
            capacity_upper_nats: Some(sol.capacity_upper),
            gap_bound: Some(sol.gap_bound),
            gap_bound_heuristic: sol.gap_bound_heuristic,
            t_final: finite(sol.t_final),
            power: Some(sol.r_star.trace()),
            target_rate: None,
            r_star: Some(matrix_to_rows(sol.r_star.as_matrix())),
            k21_star: Some(matrix_to_rows(&sol.k21_star)),
            lambda: Some(-sol.lambda_star),
            eigenvalues_r_star: Some(sol.r_star.eigenvalues()),
            eigenvalues_w1_minus_w2: class.eigenvalues.clone(),
            newton_steps: sol.newton_steps(),
            stage_steps: sol.stages.iter().map(|(_, n)| *n).collect(),
            final_residual: Some(sol.final_residual),
            error: None,
            trace: sol.trace.rows.clone(),
            wall_time: 0.0,
            config: cfg,
        }
    }

    fn failed(err: &SolverError, class: &crate::channel::Classification, mode: &str, cfg: SolverConfig) -> Self {
        let trace = err.trace().map(|t| t.rows.clone()).unwrap_or_default();
        Self {
            status: RunStatus::NotConverged,
            mode: mode.to_string(),
            channel_class: class.class,
            capacity_nats: None,
            capacity_bits: None,
            capacity_upper_nats: None,
            gap_bound: None,
            gap_bound_heuristic: false,
            t_final: None,
            power: None,
            target_rate: None,
            r_star: None,
            k21_star: None,
            lambda: None,
            eigenvalues_r_star: None,
            eigenvalues_w1_minus_w2: class.eigenvalues.clone(),
            newton_steps: trace.len(),
            stage_steps: Vec::new(),
            final_residual: None,
            error: Some(err.to_string()),
            trace,
            wall_time: 0.0,
            config: cfg,
        }
    }
}

/// Outcome of running one problem file.
#[derive(Debug)]
pub enum RunOutcome {
    Converged(ResultFile),
    /// The solver failed; the result holds the error and any partial trace.
    NotConverged(ResultFile),
}

impl RunOutcome {
    pub fn result(&self) -> &ResultFile {
        match self {
            RunOutcome::Converged(r) | RunOutcome::NotConverged(r) => r,
        }
    }
}

/// Solves a validated problem. `mode` and `target_rate` override the file when given.
pub fn run_problem(
    problem: &ProblemFile,
    overrides: &SolverOverrides,
    mode: Option<ProblemMode>,
    target_rate: Option<f64>,
) -> Result<RunOutcome, InputError> {
    problem.validate()?;
    let ch = problem.channel().map_err(|e| field("H1", e.to_string()))?;
    let cfg = problem.solver.merged(overrides).apply(SolverConfig::default());
    cfg.validate().map_err(|e| field("solver", e.to_string()))?;
    let mode = mode.unwrap_or(problem.mode);
    let target_rate = target_rate.or(problem.target_rate);
    let class = classify_degraded(&ch);
    let start = Instant::now();
    let total = || match problem.power {
        Power::Total(p) => Ok(p),
        Power::PerAntenna(_) => Err(field("power", "this mode needs a scalar power")),
    };

    let mode_name = serde_json::to_value(mode).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    let outcome = match mode {
        ProblemMode::Auto => solve(&ch, total()?, SolveMode::Auto, &cfg).map(|s| (s, None)),
        ProblemMode::Minimax => solve(&ch, total()?, SolveMode::Minimax, &cfg).map(|s| (s, None)),
        ProblemMode::Degraded => solve(&ch, total()?, SolveMode::Degraded, &cfg).map(|s| (s, None)),
        ProblemMode::PerAntenna => {
            let Power::PerAntenna(caps) = &problem.power else {
                return Err(field("power", "per_antenna mode needs a vector of caps"));
            };
            let budget = PerAntennaBudget::new(caps.clone(), problem.total_power).map_err(|e| field("power", e.to_string()))?;
            solve_per_antenna(&ch, &budget, &cfg).map(|s| (s, None))
        }
        ProblemMode::Dual => {
            let rate = target_rate.ok_or_else(|| field("target_rate", "dual mode needs a target rate"))?;
            let mut target = DualTarget::new(rate).map_err(|e| field("target_rate", e.to_string()))?;
            if let Power::Total(p) = problem.power {
                target.p_hi = Some(p);
            }
            solve_dual(&ch, &target, &cfg).map(|d| (d.solution, Some((d.power, rate))))
        }
    };
    let wall_time = start.elapsed().as_secs_f64();
    Ok(match outcome {
        Ok((sol, dual)) => {
            let mut r = ResultFile::from_solution(&sol, &class, cfg);
            if let Some((p, rate)) = dual {
                r.power = Some(p);
                r.target_rate = Some(rate);
            }
            r.wall_time = wall_time;
            RunOutcome::Converged(r)
        }
        Err(err @ (SolverError::Shape(_) | SolverError::InvalidInput(_) | SolverError::Precondition(_))) => {
            return Err(field("mode", err.to_string()))
        }
        Err(err) => {
            let mut r = ResultFile::failed(&err, &class, &mode_name, cfg);
            r.target_rate = target_rate.filter(|_| mode == ProblemMode::Dual);
            r.wall_time = wall_time;
            RunOutcome::NotConverged(r)
        }
    })
}

/// Comma-separated trace, one row per Newton step, numbers in `{:.17e}`.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("t,iter,residual,f,C,step_size\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.t, r.iter, r.residual, r.f, r.c, r.step_size
        );
    }
    out
}

/// Random-channel experiment: `count` channels with i.i.d. standard normal
/// entries (H1 then H2 of each channel, filled row by row from one
/// [`NormalSource`] stream).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchSpec {
    pub m: usize,
    pub n1: usize,
    pub n2: usize,
    pub count: usize,
    pub seed: u64,
    pub power: f64,
    pub mode: SolveMode,
    pub config: SolverConfig,
}

impl BatchSpec {
    pub fn channels(&self) -> Vec<ChannelPair> {
        let mut g = NormalSource::new(self.seed);
        (0..self.count)
            .map(|_| {
                let h1 = g.matrix(self.n1, self.m);
                let h2 = g.matrix(self.n2, self.m);
                ChannelPair::new(h1, h2).expect("generated channel is valid")
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchChannel {
    pub index: usize,
    pub converged: bool,
    pub channel_class: Degradedness,
    pub newton_steps: usize,
    pub stage_steps: Vec<usize>,
    pub capacity_upper_nats: Option<f64>,
    pub capacity_nats: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBucket {
    /// Inclusive lower edge.
    pub lo: usize,
    /// Exclusive upper edge.
    pub hi: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub spec: BatchSpec,
    pub channels: Vec<BatchChannel>,
    pub histogram: Vec<HistogramBucket>,
    pub median_steps: Option<f64>,
    pub min_steps: Option<usize>,
    pub max_steps: Option<usize>,
    pub failures: usize,
}

impl BatchSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    /// Converged channels needing at most `limit` Newton steps in total.
    pub fn within(&self, limit: usize) -> usize {
        self.channels.iter().filter(|c| c.converged && c.newton_steps <= limit).count()
    }
}

pub const HISTOGRAM_WIDTH: usize = 5;

fn solve_one(index: usize, ch: &ChannelPair, spec: &BatchSpec) -> BatchChannel {
    let class = classify_degraded(ch).class;
    match solve(ch, spec.power, spec.mode, &spec.config) {
        Ok(sol) => BatchChannel {
            index,
            converged: true,
            channel_class: class,
            newton_steps: sol.newton_steps(),
            stage_steps: sol.stages.iter().map(|(_, n)| *n).collect(),
            capacity_upper_nats: Some(sol.capacity_upper),
            capacity_nats: Some(sol.capacity_achievable),
            error: None,
        },
        Err(err) => BatchChannel {
            index,
            converged: false,
            channel_class: class,
            newton_steps: err.trace().map_or(0, |t| t.len()),
            stage_steps: Vec::new(),
            capacity_upper_nats: None,
            capacity_nats: None,
            error: Some(err.to_string()),
        },
    }
}

/// Solves every channel of the batch on up to `jobs` threads. Results are in
/// channel order whatever the completion order.
pub fn run_batch(spec: &BatchSpec, jobs: usize) -> Result<BatchSummary, SolverError> {
    if spec.count == 0 || spec.m == 0 || spec.n1 == 0 || spec.n2 == 0 {
        return Err(SolverError::InvalidInput("batch needs count, m, n1, n2 >= 1".into()));
    }
    spec.config.validate()?;
    let channels = spec.channels();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| SolverError::InvalidInput(e.to_string()))?;
    let results: Vec<BatchChannel> =
        pool.install(|| channels.par_iter().enumerate().map(|(i, ch)| solve_one(i, ch, spec)).collect());

    let mut steps: Vec<usize> = results.iter().filter(|c| c.converged).map(|c| c.newton_steps).collect();
    steps.sort_unstable();
    let median_steps = match steps.len() {
        0 => None,
        n if n % 2 == 1 => Some(steps[n / 2] as f64),
        n => Some(0.5 * (steps[n / 2 - 1] + steps[n / 2]) as f64),
    };
    let histogram = match steps.last() {
        None => Vec::new(),
        Some(&max) => (0..=max / HISTOGRAM_WIDTH)
            .map(|b| {
                let (lo, hi) = (b * HISTOGRAM_WIDTH, (b + 1) * HISTOGRAM_WIDTH);
                HistogramBucket { lo, hi, count: steps.iter().filter(|&&s| s >= lo && s < hi).count() }
            })
            .collect(),
    };
    Ok(BatchSummary {
        spec: *spec,
        failures: results.iter().filter(|c| !c.converged).count(),
        min_steps: steps.first().copied(),
        max_steps: steps.last().copied(),
        median_steps,
        histogram,
        channels: results,
    })
}
