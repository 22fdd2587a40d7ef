//! Secrecy capacity and globally optimal transmit covariance of Gaussian MIMO
//! wiretap channels.
//!
//! The secrecy capacity `max_R ½ ln(|I + W1 R| / |I + W2 R|)` subject to
//! `tr R ≤ P` is not a convex problem. It equals the value of a convex-concave
//! saddle problem over the transmit covariance `R` and the joint noise
//! covariance `K = [[I, K21ᵀ], [K21, I]]`, which this crate solves with a
//! log-barrier method whose inner loop is a residual-form primal-dual Newton
//! iteration.
//!
//! ```no_run
//! use nalgebra::dmatrix;
//! use secrecy_core::{solve_minimax, ChannelPair, SolverConfig};
//!
//! let ch = ChannelPair::new(
//!     dmatrix![0.77, -0.30; -0.32, -0.64],
//!     dmatrix![0.54, -0.11; -0.93, -1.71],
//! ).unwrap();
//! let sol = solve_minimax(&ch, 10.0, &SolverConfig::default()).unwrap();
//! println!("Cs ≈ {:.6} nats (gap ≤ {:.1e})", sol.capacity_upper, sol.gap_bound);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier_solver;
pub mod channel;
pub mod config;
pub mod error;
pub mod io;
pub mod kkt_newton;
pub mod matcalc;
pub mod objective;
pub mod rng;
pub mod trace;
pub mod variants;

pub use barrier_solver::{
    extract_certificate, gap_bound, solve, solve_degraded, solve_minimax, KktCertificate, SaddleSolution, SolveKind,
    SolveMode,
};
pub use channel::{
    classify_degraded, effective_gram, initial_point, ChannelPair, Classification, Degradedness, NoiseCovariance,
    SaddleState, TransmitCovariance,
};
pub use config::SolverConfig;
pub use error::{Result, SolverError};
pub use matcalc::SymMat;
pub use objective::{minimax_objective, secrecy_rate, BarrierObjective, DegradedObjective, DerivativeBundle, PowerCaps};
pub use trace::{ConvergenceTrace, TraceRow};
pub use variants::{solve_dual, solve_per_antenna, DualSolution, DualTarget, PerAntennaBudget};
