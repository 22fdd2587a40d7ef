//! Wiretap channel model: legitimate and eavesdropper channel matrices, their
//! Gram matrices and the feasible noise and transmit covariances.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::matcalc::{unvech, vech_len, SymMat};

/// Channel pair `H1` (`n1`×`m`, legitimate) and `H2` (`n2`×`m`, eavesdropper).
#[derive(Debug, Clone)]
pub struct ChannelPair {
    h1: DMatrix<f64>,
    h2: DMatrix<f64>,
    h_stack: DMatrix<f64>,
    w1: SymMat,
    w2: SymMat,
}

impl ChannelPair {
    pub fn new(h1: DMatrix<f64>, h2: DMatrix<f64>) -> Result<Self> {
        if h1.ncols() != h2.ncols() {
            return Err(SolverError::Shape(format!(
                "column mismatch: H1 has {} columns, H2 has {}",
                h1.ncols(),
                h2.ncols()
            )));
        }
        if h1.ncols() == 0 || h1.nrows() == 0 || h2.nrows() == 0 {
            return Err(SolverError::Shape("channel matrices must be non-empty".into()));
        }
        if h1.iter().chain(h2.iter()).any(|v| !v.is_finite()) {
            return Err(SolverError::InvalidInput("channel has non-finite entries".into()));
        }
        let m = h1.ncols();
        let (n1, n2) = (h1.nrows(), h2.nrows());
        let mut h_stack = DMatrix::zeros(n1 + n2, m);
        h_stack.rows_mut(0, n1).copy_from(&h1);
        h_stack.rows_mut(n1, n2).copy_from(&h2);
        let w1 = SymMat::symmetrized(h1.transpose() * &h1);
        let w2 = SymMat::symmetrized(h2.transpose() * &h2);
        Ok(Self { h1, h2, h_stack, w1, w2 })
    }

    pub fn from_rows(h1: &[Vec<f64>], h2: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_from_rows(h1, "H1")?, matrix_from_rows(h2, "H2")?)
    }

    /// Transmit antennas.
    pub fn m(&self) -> usize {
        self.h1.ncols()
    }
    pub fn n1(&self) -> usize {
        self.h1.nrows()
    }
    pub fn n2(&self) -> usize {
        self.h2.nrows()
    }
    pub fn n(&self) -> usize {
        self.n1() + self.n2()
    }
    pub fn h1(&self) -> &DMatrix<f64> {
        &self.h1
    }
    pub fn h2(&self) -> &DMatrix<f64> {
        &self.h2
    }
    /// `[H1; H2]`.
    pub fn h_stack(&self) -> &DMatrix<f64> {
        &self.h_stack
    }
    pub fn w1(&self) -> &SymMat {
        &self.w1
    }
    pub fn w2(&self) -> &SymMat {
        &self.w2
    }

    /// Same channel seen through an orthogonal change of the transmit basis.
    pub fn rotated(&self, u: &DMatrix<f64>) -> Result<Self> {
        Self::new(&self.h1 * u, &self.h2 * u)
    }
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err(SolverError::Shape(format!("{name} is empty")));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(SolverError::Shape(format!(
            "{name} row {i} has {} entries, expected {cols}",
            r.len()
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), cols, &flat))
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Cholesky factor of a symmetric matrix, or a domain error when it is not
/// positive definite.
pub(crate) fn spd(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::Domain(format!("{what} has non-finite entries")));
    }
    Cholesky::new(m.clone()).ok_or_else(|| SolverError::Domain(format!("{what} is not positive definite")))
}

pub(crate) fn ln_det(c: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

pub(crate) fn spd_inverse(c: &Cholesky<f64, Dyn>) -> DMatrix<f64> {
    SymMat::symmetrized(c.inverse()).into_matrix()
}

/// Noise covariance `K = [[I, K21ᵀ], [K21, I]]` with `K21` of size `n2`×`n1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCovariance {
    k21: DMatrix<f64>,
}

impl NoiseCovariance {
    /// Checks `‖K21‖₂ < 1`, which is the same as `K ≻ 0`.
    pub fn new(k21: DMatrix<f64>) -> Result<Self> {
        if k21.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::InvalidInput("K21 has non-finite entries".into()));
        }
        let nc = Self { k21 };
        if nc.spectral_norm() >= 1.0 {
            return Err(SolverError::Domain(format!(
                "noise covariance infeasible: ‖K21‖₂ = {} ≥ 1",
                nc.spectral_norm()
            )));
        }
        Ok(nc)
    }

    pub fn identity(n1: usize, n2: usize) -> Self {
        Self { k21: DMatrix::zeros(n2, n1) }
    }

    pub fn k21(&self) -> &DMatrix<f64> {
        &self.k21
    }

    pub fn spectral_norm(&self) -> f64 {
        if self.k21.is_empty() {
            return 0.0;
        }
        self.k21.clone().svd(false, false).singular_values.max()
    }

    pub fn assembled(&self) -> SymMat {
        SymMat::symmetrized(assemble_k(&self.k21))
    }
}

pub(crate) fn assemble_k(k21: &DMatrix<f64>) -> DMatrix<f64> {
    let (n2, n1) = k21.shape();
    let mut k = DMatrix::identity(n1 + n2, n1 + n2);
    k.view_mut((n1, 0), (n2, n1)).copy_from(k21);
    k.view_mut((0, n1), (n1, n2)).copy_from(&k21.transpose());
    k
}

/// Transmit covariance with its power budget.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitCovariance {
    pub r: SymMat,
    pub power: f64,
}

impl TransmitCovariance {
    /// Requires `R ⪰ 0` (eigenvalues above `-1e-12·(1+P)`) and `tr R ≤ P(1+1e-9)`.
    pub fn new(r: SymMat, power: f64) -> Result<Self> {
        if !(power > 0.0) || !power.is_finite() {
            return Err(SolverError::InvalidInput(format!("power must be positive, got {power}")));
        }
        let min = r.eigenvalues().last().copied().unwrap_or(0.0);
        if min < -1e-12 * (1.0 + power) {
            return Err(SolverError::Domain(format!("R is not PSD (min eigenvalue {min})")));
        }
        if r.trace() > power * (1.0 + 1e-9) {
            return Err(SolverError::Domain(format!("tr R = {} exceeds P = {power}", r.trace())));
        }
        Ok(Self { r, power })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degradedness {
    /// `W1 ⪰ W2`.
    Degraded,
    /// `W1 ⪯ W2`: the eavesdropper is never weaker, so the secrecy capacity is zero.
    ReverselyDegraded,
    Indefinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub class: Degradedness,
    /// Eigenvalues of `W1 − W2`, descending.
    pub eigenvalues: Vec<f64>,
    pub tolerance: f64,
}

/// Classifies the channel by the sign pattern of `eig(W1 − W2)` with the relative
/// tolerance `1e-9·(1 + ‖W1‖₂ + ‖W2‖₂)`.
pub fn classify_degraded(ch: &ChannelPair) -> Classification {
    let diff = SymMat::symmetrized(ch.w1().as_matrix() - ch.w2().as_matrix());
    let eigenvalues = diff.eigenvalues();
    let norm = |w: &SymMat| w.eigenvalues().first().copied().unwrap_or(0.0).abs();
    let tolerance = 1e-9 * (1.0 + norm(ch.w1()) + norm(ch.w2()));
    let max = eigenvalues[0];
    let min = eigenvalues[eigenvalues.len() - 1];
    let class = if min >= -tolerance {
        Degradedness::Degraded
    } else if max <= tolerance {
        Degradedness::ReverselyDegraded
    } else {
        Degradedness::Indefinite
    };
    Classification { class, eigenvalues, tolerance }
}

/// `W = Hᵀ K⁻¹ H`.
pub fn effective_gram(ch: &ChannelPair, k: &NoiseCovariance) -> Result<SymMat> {
    if k.k21().shape() != (ch.n2(), ch.n1()) {
        return Err(SolverError::Shape(format!(
            "K21 must be {}x{}, got {}x{}",
            ch.n2(),
            ch.n1(),
            k.k21().nrows(),
            k.k21().ncols()
        )));
    }
    let chol = spd(k.assembled().as_matrix(), "K")?;
    let h = ch.h_stack();
    Ok(SymMat::symmetrized(h.transpose() * chol.solve(h)))
}

/// Primal-dual iterate: `x = vech(R)`, `y = vec(K21)` and the multiplier of the
/// power equality.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleState {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub lambda: f64,
}

impl SaddleState {
    pub fn new(r: &SymMat, k21: &DMatrix<f64>, lambda: f64) -> Self {
        Self {
            x: r.vech(),
            y: DVector::from_column_slice(k21.as_slice()),
            lambda,
        }
    }

    pub fn r(&self) -> SymMat {
        unvech(&self.x).expect("state x has triangular length")
    }

    pub fn k21(&self, n1: usize, n2: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(n2, n1, self.y.as_slice())
    }

    /// Primal block `z = [x; y]`.
    pub fn z(&self) -> DVector<f64> {
        let mut z = DVector::zeros(self.x.len() + self.y.len());
        z.rows_mut(0, self.x.len()).copy_from(&self.x);
        z.rows_mut(self.x.len(), self.y.len()).copy_from(&self.y);
        z
    }

    pub(crate) fn from_z(z: &DVector<f64>, nx: usize, lambda: f64) -> Self {
        Self {
            x: z.rows(0, nx).into_owned(),
            y: z.rows(nx, z.len() - nx).into_owned(),
            lambda,
        }
    }
}

/// `R0 = (P/m)·I`, `K21 = 0`, `λ = 0`.
pub fn initial_point(ch: &ChannelPair, power: f64) -> Result<SaddleState> {
    if !(power > 0.0) || !power.is_finite() {
        return Err(SolverError::InvalidInput(format!("power must be positive, got {power}")));
    }
    let m = ch.m();
    let r0 = SymMat::symmetrized(DMatrix::identity(m, m) * (power / m as f64));
    let state = SaddleState::new(&r0, &DMatrix::zeros(ch.n2(), ch.n1()), 0.0);
    debug_assert_eq!(state.x.len(), vech_len(m));
    Ok(state)
}
