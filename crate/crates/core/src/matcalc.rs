//! Matrix-calculus building blocks: half-vectorization, duplication matrices and
//! Kronecker products.
//!
//! `vech` stacks the lower triangle (diagonal included) column by column:
//! for a 3×3 matrix the order is `s00, s10, s20, s11, s21, s22`. Every Hessian
//! index map in the crate depends on this order.
//!
//! `vec` is the usual column-major stacking, which is also nalgebra's storage
//! order, so `vec(A)` is `A.as_slice()`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SolverError};

/// Dense symmetric matrix. Symmetry is enforced on construction by averaging
/// with the transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat(DMatrix<f64>);

impl SymMat {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(SolverError::Shape(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::InvalidInput("matrix has non-finite entries".into()));
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrize without validation; for internal products that are symmetric
    /// up to rounding.
    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        SymMat((m + t) * 0.5)
    }

    pub fn identity(n: usize) -> Self {
        SymMat(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMat(DMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn vech(&self) -> DVector<f64> {
        vech_unchecked(&self.0)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.0.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }
}

/// Length of `vech` for an `m`×`m` matrix.
pub fn vech_len(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Half-vectorization of a square matrix (lower triangle, column-wise).
pub fn vech(s: &DMatrix<f64>) -> Result<DVector<f64>> {
    if !s.is_square() {
        return Err(SolverError::Shape(format!(
            "vech needs a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    Ok(vech_unchecked(s))
}

fn vech_unchecked(s: &DMatrix<f64>) -> DVector<f64> {
    let m = s.nrows();
    let mut out = Vec::with_capacity(vech_len(m));
    for j in 0..m {
        for i in j..m {
            out.push(s[(i, j)]);
        }
    }
    DVector::from_vec(out)
}

/// Inverse of [`vech`]: rebuilds the symmetric matrix.
pub fn unvech(v: &DVector<f64>) -> Result<SymMat> {
    let m = dim_from_vech_len(v.len()).ok_or_else(|| {
        SolverError::Shape(format!("{} is not a triangular number", v.len()))
    })?;
    let mut s = DMatrix::zeros(m, m);
    let mut k = 0;
    for j in 0..m {
        for i in j..m {
            s[(i, j)] = v[k];
            s[(j, i)] = v[k];
            k += 1;
        }
    }
    Ok(SymMat(s))
}

fn dim_from_vech_len(len: usize) -> Option<usize> {
    let m = ((((8 * len + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    (vech_len(m) == len).then_some(m)
}

/// Position of entry `(i, j)` (with `i >= j`) inside `vech`.
pub fn vech_index(m: usize, i: usize, j: usize) -> usize {
    debug_assert!(i >= j && i < m);
    // columns before j hold m + (m-1) + ... + (m-j+1) entries
    j * m - j * j.saturating_sub(1) / 2 + (i - j)
}

/// Sparse 0/1 matrix stored both densely and as per-column support lists.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroOneMatrix {
    dense: DMatrix<f64>,
    support: Vec<Vec<usize>>,
}

impl ZeroOneMatrix {
    fn from_support(rows: usize, support: Vec<Vec<usize>>) -> Self {
        let mut dense = DMatrix::zeros(rows, support.len());
        for (c, rs) in support.iter().enumerate() {
            for &r in rs {
                dense[(r, c)] = 1.0;
            }
        }
        Self { dense, support }
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.dense
    }

    pub fn nrows(&self) -> usize {
        self.dense.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.dense.ncols()
    }

    /// Row indices holding a one in column `c`.
    pub fn support(&self, c: usize) -> &[usize] {
        &self.support[c]
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.dense * v
    }

    /// `Mᵀ v`, summing the supported entries of `v` per column.
    pub fn transpose_apply(&self, v: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.support.len(),
            self.support.iter().map(|rs| rs.iter().map(|&r| v[r]).sum::<f64>()),
        )
    }

    /// `selfᵀ · mid · right`, exploiting the 0/1 structure of both factors.
    pub fn sandwich(&self, mid: &DMatrix<f64>, right: &ZeroOneMatrix) -> DMatrix<f64> {
        assert_eq!(mid.nrows(), self.nrows());
        assert_eq!(mid.ncols(), right.nrows());
        DMatrix::from_fn(self.ncols(), right.ncols(), |p, q| {
            let mut acc = 0.0;
            for &a in &self.support[p] {
                for &b in &right.support[q] {
                    acc += mid[(a, b)];
                }
            }
            acc
        })
    }

    pub fn rank(&self) -> usize {
        self.dense.clone().svd(false, false).rank(1e-10)
    }
}

/// `D_m` with `D_m · vech(S) = vec(S)` for every symmetric `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct DuplicationMatrix {
    pub m: usize,
    inner: ZeroOneMatrix,
}

impl DuplicationMatrix {
    pub fn new(m: usize) -> Self {
        let mut support = Vec::with_capacity(vech_len(m));
        for j in 0..m {
            for i in j..m {
                let lower = i + m * j;
                let upper = j + m * i;
                support.push(if i == j { vec![lower] } else { vec![lower, upper] });
            }
        }
        Self { m, inner: ZeroOneMatrix::from_support(m * m, support) }
    }
}

impl std::ops::Deref for DuplicationMatrix {
    type Target = ZeroOneMatrix;
    fn deref(&self) -> &ZeroOneMatrix {
        &self.inner
    }
}

pub fn duplication_matrix(m: usize) -> DuplicationMatrix {
    DuplicationMatrix::new(m)
}

/// `D̃_n` for the off-diagonal block of an `(n1+n2)`-square matrix with identity
/// diagonal blocks. Maps `vec(dK21)` (`dK21` is `n2`×`n1`) to `vec(dK)` with
/// `dK = [[0, dK21ᵀ], [dK21, 0]]`. These are the columns of `D_n` that belong
/// to the lower-left block.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDuplicationMatrix {
    pub n1: usize,
    pub n2: usize,
    inner: ZeroOneMatrix,
}

impl ReducedDuplicationMatrix {
    pub fn new(n1: usize, n2: usize) -> Self {
        let n = n1 + n2;
        let mut support = Vec::with_capacity(n1 * n2);
        for j in 0..n1 {
            for i in 0..n2 {
                let row = n1 + i;
                support.push(vec![row + n * j, j + n * row]);
            }
        }
        Self { n1, n2, inner: ZeroOneMatrix::from_support(n * n, support) }
    }
}

impl std::ops::Deref for ReducedDuplicationMatrix {
    type Target = ZeroOneMatrix;
    fn deref(&self) -> &ZeroOneMatrix {
        &self.inner
    }
}

pub fn reduced_duplication_matrix(n1: usize, n2: usize) -> ReducedDuplicationMatrix {
    ReducedDuplicationMatrix::new(n1, n2)
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Column-major vectorization.
pub fn vec_of(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(a.as_slice())
}

/// Inverse of [`vec_of`] for a `rows`×`cols` matrix.
pub fn unvec(v: &DVector<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(rows, cols, v.as_slice())
}
