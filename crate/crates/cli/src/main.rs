//! `secrecy` command-line tool.
//!
//! Exit codes: 0 converged, 1 input error, 2 solver did not converge (the
//! result file with the partial trace is still written).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use secrecy_core::io::{
    run_batch, run_problem, trace_csv, BatchSpec, InputError, ProblemFile, ProblemMode, ResultFile, RunOutcome,
    SolverOverrides,
};
use secrecy_core::{SolveMode, SolverConfig};

const EXIT_INPUT: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;

#[derive(Parser)]
#[command(name = "secrecy", version, about = "Secrecy capacity of Gaussian MIMO wiretap channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file and write the result file.
    Solve {
        file: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
        /// Overrides the mode in the file.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Target rate in nats, used with `--mode dual`.
        #[arg(long)]
        rate: Option<f64>,
        #[command(flatten)]
        out: Output,
    },
    /// Solve a batch of seeded random channels and summarize Newton step counts.
    Batch {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n1: usize,
        #[arg(long)]
        n2: usize,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        /// Worker threads (default: all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Inner Newton residual tolerance.
        #[arg(long)]
        target_residual: Option<f64>,
        #[arg(long, default_value_t = 10.0)]
        power: f64,
        #[arg(long, value_enum, default_value_t = BatchMode::Minimax)]
        mode: BatchMode,
        #[command(flatten)]
        solver: SolverFlags,
        #[command(flatten)]
        out: Output,
    },
    /// Minimum power that reaches a target secrecy rate.
    Dual {
        file: PathBuf,
        /// Target rate in nats.
        #[arg(long)]
        rate: f64,
        #[command(flatten)]
        solver: SolverFlags,
        #[command(flatten)]
        out: Output,
    },
    /// Export the convergence trace of a result file.
    TraceExport {
        result: PathBuf,
        #[arg(long, value_enum, default_value_t = TraceFormat::Csv)]
        format: TraceFormat,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Args, Default)]
struct SolverFlags {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    eps_gap: Option<f64>,
    #[arg(long)]
    eps_newton: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

impl SolverFlags {
    fn overrides(&self) -> SolverOverrides {
        SolverOverrides {
            alpha: self.alpha,
            beta: self.beta,
            t0: self.t0,
            mu: self.mu,
            t_max: self.t_max,
            eps_gap: self.eps_gap,
            eps_newton: self.eps_newton,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Args)]
struct Output {
    /// Output file; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Auto,
    Minimax,
    Degraded,
    PerAntenna,
    Dual,
}

impl From<ModeArg> for ProblemMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Auto => ProblemMode::Auto,
            ModeArg::Minimax => ProblemMode::Minimax,
            ModeArg::Degraded => ProblemMode::Degraded,
            ModeArg::PerAntenna => ProblemMode::PerAntenna,
            ModeArg::Dual => ProblemMode::Dual,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BatchMode {
    Auto,
    Minimax,
}

#[derive(Clone, Copy, ValueEnum)]
enum TraceFormat {
    Csv,
}

fn write_output(out: &Output, text: &str) -> Result<(), String> {
    match &out.output {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.to_string()),
                _ => Ok(()),
            }
        }
    }
}

fn fail(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(EXIT_INPUT)
}

fn report(r: &ResultFile) {
    match (r.capacity_nats, r.gap_bound) {
        (Some(c), Some(gap)) => eprintln!(
            "{}: Cs = {c:.8} nats ({:.8} bits), gap bound {gap:.2e}, {} Newton steps",
            r.mode,
            c / std::f64::consts::LN_2,
            r.newton_steps
        ),
        _ => eprintln!(
            "{}: not converged after {} Newton steps: {}",
            r.mode,
            r.newton_steps,
            r.error.as_deref().unwrap_or("unknown failure")
        ),
    }
    if let (Some(p), Some(rate)) = (r.power, r.target_rate) {
        eprintln!("minimum power {p:.8} for rate {rate:.8} nats");
    }
}

fn run_file(path: &Path, flags: &SolverFlags, mode: Option<ProblemMode>, rate: Option<f64>, out: &Output) -> ExitCode {
    let outcome = match ProblemFile::read(path).and_then(|p| run_problem(&p, &flags.overrides(), mode, rate)) {
        Ok(o) => o,
        Err(e) => return fail(e),
    };
    let result = outcome.result();
    report(result);
    if let Err(e) = write_output(out, &result.to_json()) {
        return fail(e);
    }
    match outcome {
        RunOutcome::Converged(_) => ExitCode::SUCCESS,
        RunOutcome::NotConverged(_) => ExitCode::from(EXIT_NOT_CONVERGED),
    }
}

fn batch(
    (m, n1, n2, count, seed): (usize, usize, usize, usize, u64),
    jobs: usize,
    target_residual: Option<f64>,
    power: f64,
    mode: BatchMode,
    flags: &SolverFlags,
    out: &Output,
) -> ExitCode {
    if count == 0 || m == 0 || n1 == 0 || n2 == 0 {
        return fail("m, n1, n2 and count must be at least 1");
    }
    if !(power.is_finite() && power > 0.0) {
        return fail("power must be positive");
    }
    let overrides = SolverOverrides { eps_newton: target_residual, ..SolverOverrides::default() };
    let config = overrides.merged(&flags.overrides()).apply(SolverConfig::default());
    if let Err(e) = config.validate() {
        return fail(e);
    }
    let mode = match mode {
        BatchMode::Auto => SolveMode::Auto,
        BatchMode::Minimax => SolveMode::Minimax,
    };
    let spec = BatchSpec { m, n1, n2, count, seed, power, mode, config };
    let summary = match run_batch(&spec, jobs) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    eprintln!(
        "{count} channels: median {} Newton steps (min {}, max {}), {} failures",
        summary.median_steps.map_or("-".into(), |v| format!("{v}")),
        summary.min_steps.map_or("-".into(), |v| v.to_string()),
        summary.max_steps.map_or("-".into(), |v| v.to_string()),
        summary.failures
    );
    if let Err(e) = write_output(out, &summary.to_json()) {
        return fail(e);
    }
    if summary.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NOT_CONVERGED)
    }
}

fn trace_export(path: &Path, out: &Output) -> ExitCode {
    let result = match std::fs::read_to_string(path)
        .map_err(|source| InputError::Read { path: path.display().to_string(), source })
        .and_then(|text| ResultFile::parse(&text))
    {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    if result.trace.is_empty() {
        return fail(format!("{} has no trace", path.display()));
    }
    match write_output(out, &trace_csv(&result.trace)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap would exit with 2 on usage errors, which is reserved for non-convergence
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INPUT) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Solve { file, solver, mode, rate, out } => run_file(&file, &solver, mode.map(Into::into), rate, &out),
        Command::Batch { m, n1, n2, count, seed, jobs, target_residual, power, mode, solver, out } => {
            batch((m, n1, n2, count, seed), jobs, target_residual, power, mode, &solver, &out)
        }
        Command::Dual { file, rate, solver, out } => run_file(&file, &solver, Some(ProblemMode::Dual), Some(rate), &out),
        Command::TraceExport { result, format: TraceFormat::Csv, out } => trace_export(&result, &out),
    }
}
