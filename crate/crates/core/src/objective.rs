//! Secrecy rate, the minimax upper bound and the barrier-augmented objective with
//! exact first and second derivatives in the reduced variables
//! `x = vech(R)`, `y = vec(K21)`.
//!
//! Units: [`secrecy_rate`] and [`minimax_objective`] return nats and include the
//! factor ½. Everything the Newton solver touches (barrier values, gradients,
//! Hessians, multipliers) is expressed without the ½, i.e. as plain log-det
//! differences:
//!
//! ```text
//! f(R, K)   = ln|K + HRHᵀ| − ln|K| − ln|I + H2 R H2ᵀ|
//! f_t(R, K) = f(R, K) + ln|R| / t − ln|K| / t
//! ```
//!
//! `Z1 = (I + W R)⁻¹ W` is evaluated as `Hᵀ (K + Q)⁻¹ H` with `Q = H R Hᵀ`, and
//! `Z2` as `H2ᵀ (I + H2 R H2ᵀ)⁻¹ H2`, so only positive-definite factorizations are
//! needed and both come out symmetric.

use nalgebra::{DMatrix, DVector};

use crate::channel::{assemble_k, ln_det, spd, spd_inverse, ChannelPair, NoiseCovariance};
use crate::error::{Result, SolverError};
use crate::kkt_newton::BarrierProblem;
use crate::matcalc::{
    kron, unvech, vech_index, vech_len, DuplicationMatrix, ReducedDuplicationMatrix, SymMat,
};

fn ln_det_or_lu(m: &DMatrix<f64>) -> f64 {
    match nalgebra::Cholesky::new(m.clone()) {
        Some(c) => ln_det(&c),
        None => m.clone().lu().determinant().ln(),
    }
}

fn ln_det_i_plus(h: &DMatrix<f64>, r: &DMatrix<f64>) -> f64 {
    let n = h.nrows();
    ln_det_or_lu(&(DMatrix::identity(n, n) + h * r * h.transpose()))
}

/// `C(R) = ½ (ln|I + W1 R| − ln|I + W2 R|)` in nats, not clamped at zero.
pub fn secrecy_rate(ch: &ChannelPair, r: &SymMat) -> f64 {
    0.5 * (ln_det_i_plus(ch.h1(), r.as_matrix()) - ln_det_i_plus(ch.h2(), r.as_matrix()))
}

/// `f(R, K) = ½ ln(|I + K⁻¹ H R Hᵀ| / |I + W2 R|)` in nats. Never below `C(R)`.
pub fn minimax_objective(ch: &ChannelPair, r: &SymMat, k: &NoiseCovariance) -> Result<f64> {
    Ok(0.5 * raw_minimax(ch, r.as_matrix(), k.k21())?)
}

pub(crate) fn raw_minimax(ch: &ChannelPair, r: &DMatrix<f64>, k21: &DMatrix<f64>) -> Result<f64> {
    let k = assemble_k(k21);
    let chol_k = spd(&k, "K")?;
    let h = ch.h_stack();
    let s = SymMat::symmetrized(&k + h * r * h.transpose()).into_matrix();
    let chol_s = spd(&s, "K + HRHᵀ")?;
    Ok(ln_det(&chol_s) - ln_det(&chol_k) - ln_det_i_plus(ch.h2(), r))
}

/// Per-antenna caps `r_ii < P_i` and an optional total cap `tr R < P_total`, each
/// enforced by a log barrier `ln(slack) / t` added to the maximized objective.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerCaps {
    pub per_antenna: Vec<f64>,
    pub total: Option<f64>,
}

impl PowerCaps {
    pub fn term_count(&self) -> usize {
        self.per_antenna.len() + usize::from(self.total.is_some())
    }
}

/// Gradients, Hessian blocks and values of `f_t` at one interior point.
/// Values are log-det units (no ½).
#[derive(Debug, Clone)]
pub struct DerivativeBundle {
    pub grad_x: DVector<f64>,
    pub grad_y: DVector<f64>,
    pub hess_xx: DMatrix<f64>,
    pub hess_yy: DMatrix<f64>,
    pub hess_xy: DMatrix<f64>,
    pub value_f: f64,
    pub value_ft: f64,
    pub value_c: f64,
}

impl DerivativeBundle {
    /// `[[hess_xx, hess_xy], [hess_xyᵀ, hess_yy]]`.
    pub fn hessian(&self) -> DMatrix<f64> {
        let (nx, ny) = (self.grad_x.len(), self.grad_y.len());
        let mut h = DMatrix::zeros(nx + ny, nx + ny);
        h.view_mut((0, 0), (nx, nx)).copy_from(&self.hess_xx);
        h.view_mut((nx, nx), (ny, ny)).copy_from(&self.hess_yy);
        h.view_mut((0, nx), (nx, ny)).copy_from(&self.hess_xy);
        h.view_mut((nx, 0), (ny, nx)).copy_from(&self.hess_xy.transpose());
        h
    }

    pub fn gradient(&self) -> DVector<f64> {
        stack(&self.grad_x, &self.grad_y)
    }
}

pub(crate) fn stack(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() + b.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out
}

/// Matrix-level gradients shared by the gradient-only and full evaluations.
struct Pieces {
    r_inv: DMatrix<f64>,
    k_inv: DMatrix<f64>,
    s_inv: DMatrix<f64>,
    /// `K⁻¹ − (K+Q)⁻¹`, formed as `K⁻¹ Q (K+Q)⁻¹`.
    k_minus_s: DMatrix<f64>,
    z1: DMatrix<f64>,
    z2: DMatrix<f64>,
    grad_r: DMatrix<f64>,
    grad_k: DMatrix<f64>,
    ln_det_r: f64,
    ln_det_k: f64,
    ln_det_s: f64,
    ln_det_e2: f64,
}

/// Barrier-augmented minimax objective at a fixed `t`.
#[derive(Debug, Clone)]
pub struct BarrierObjective<'a> {
    channel: &'a ChannelPair,
    t: f64,
    power: f64,
    caps: Option<PowerCaps>,
    dup: DuplicationMatrix,
    rdup: ReducedDuplicationMatrix,
    /// Equality row `[vech(I); 0]` for the total-power mode.
    a: Option<DVector<f64>>,
}

impl<'a> BarrierObjective<'a> {
    /// Total-power mode: `tr R = P` as an equality constraint.
    pub fn new(channel: &'a ChannelPair, t: f64, power: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(SolverError::InvalidInput(format!("barrier parameter must be positive, got {t}")));
        }
        if !(power > 0.0) || !power.is_finite() {
            return Err(SolverError::InvalidInput(format!("power must be positive, got {power}")));
        }
        let m = channel.m();
        let nx = vech_len(m);
        let ny = channel.n1() * channel.n2();
        let mut a = DVector::zeros(nx + ny);
        for i in 0..m {
            a[vech_index(m, i, i)] = 1.0;
        }
        Ok(Self {
            channel,
            t,
            power,
            caps: None,
            dup: DuplicationMatrix::new(m),
            rdup: ReducedDuplicationMatrix::new(channel.n1(), channel.n2()),
            a: Some(a),
        })
    }

    /// Cap mode: no equality row; the caps enter as barrier terms.
    pub fn with_caps(channel: &'a ChannelPair, t: f64, caps: PowerCaps) -> Result<Self> {
        if caps.per_antenna.len() != channel.m() {
            return Err(SolverError::Shape(format!(
                "{} per-antenna caps for {} antennas",
                caps.per_antenna.len(),
                channel.m()
            )));
        }
        let power = caps.total.unwrap_or_else(|| caps.per_antenna.iter().sum());
        let mut obj = Self::new(channel, t, power)?;
        obj.a = None;
        obj.caps = Some(caps);
        Ok(obj)
    }

    pub fn at(&self, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(SolverError::InvalidInput(format!("barrier parameter must be positive, got {t}")));
        }
        Ok(Self { t, ..self.clone() })
    }

    pub fn channel(&self) -> &ChannelPair {
        self.channel
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn caps(&self) -> Option<&PowerCaps> {
        self.caps.as_ref()
    }

    pub fn dup(&self) -> &DuplicationMatrix {
        &self.dup
    }

    pub fn rdup(&self) -> &ReducedDuplicationMatrix {
        &self.rdup
    }

    fn pieces(&self, r: &DMatrix<f64>, k21: &DMatrix<f64>) -> Result<Pieces> {
        let ch = self.channel;
        let inv_t = 1.0 / self.t;
        if let Some(caps) = &self.caps {
            for (i, p) in caps.per_antenna.iter().enumerate() {
                if !(p - r[(i, i)] > 0.0) {
                    return Err(SolverError::Domain(format!("r_{i}{i} = {} reaches cap {p}", r[(i, i)])));
                }
            }
            if let Some(total) = caps.total {
                if !(total - r.trace() > 0.0) {
                    return Err(SolverError::Domain(format!("tr R = {} reaches cap {total}", r.trace())));
                }
            }
        }
        let chol_r = spd(r, "R")?;
        let k = assemble_k(k21);
        let chol_k = spd(&k, "K")?;
        let h = ch.h_stack();
        let s = SymMat::symmetrized(&k + h * r * h.transpose()).into_matrix();
        let chol_s = spd(&s, "K + HRHᵀ")?;
        let n2 = ch.n2();
        let e2 = DMatrix::identity(n2, n2) + ch.h2() * r * ch.h2().transpose();
        let chol_e2 = spd(&SymMat::symmetrized(e2).into_matrix(), "I + H2 R H2ᵀ")?;

        let r_inv = spd_inverse(&chol_r);
        let k_inv = spd_inverse(&chol_k);
        let s_inv = spd_inverse(&chol_s);
        let z1 = SymMat::symmetrized(h.transpose() * &s_inv * h).into_matrix();
        let z2 = SymMat::symmetrized(ch.h2().transpose() * chol_e2.solve(ch.h2())).into_matrix();
        let grad_r = &z1 - &z2 + &r_inv * inv_t;
        // K⁻¹ − (K+Q)⁻¹ = K⁻¹ Q (K+Q)⁻¹ avoids cancelling two large inverses
        // when K is close to singular
        let q = h * r * h.transpose();
        let k_minus_s = SymMat::symmetrized(chol_k.solve(&q) * &s_inv).into_matrix();
        let grad_k = -&k_minus_s - &k_inv * inv_t;
        Ok(Pieces {
            ln_det_r: ln_det(&chol_r),
            ln_det_k: ln_det(&chol_k),
            ln_det_s: ln_det(&chol_s),
            ln_det_e2: ln_det(&chol_e2),
            r_inv,
            k_inv,
            s_inv,
            k_minus_s,
            z1,
            z2,
            grad_r,
            grad_k,
        })
    }

    fn cap_gradient(&self, r: &DMatrix<f64>, grad_x: &mut DVector<f64>) {
        let Some(caps) = &self.caps else { return };
        let m = self.channel.m();
        let inv_t = 1.0 / self.t;
        let total_term = caps.total.map_or(0.0, |p| inv_t / (p - r.trace()));
        for (i, p) in caps.per_antenna.iter().enumerate() {
            grad_x[vech_index(m, i, i)] -= inv_t / (p - r[(i, i)]) + total_term;
        }
    }

    fn cap_value(&self, r: &DMatrix<f64>) -> f64 {
        let Some(caps) = &self.caps else { return 0.0 };
        let per: f64 = caps.per_antenna.iter().enumerate().map(|(i, p)| (p - r[(i, i)]).ln()).sum();
        let total = caps.total.map_or(0.0, |p| (p - r.trace()).ln());
        (per + total) / self.t
    }

    /// `f(R,K) + ln|R|/t − ln|K|/t` (plus cap barriers in cap mode), log-det units.
    pub fn barrier_value(&self, r: &SymMat, k: &NoiseCovariance) -> Result<f64> {
        let p = self.pieces(r.as_matrix(), k.k21())?;
        let f = p.ln_det_s - p.ln_det_k - p.ln_det_e2;
        Ok(f + (p.ln_det_r - p.ln_det_k) / self.t + self.cap_value(r.as_matrix()))
    }

    fn check_shapes(&self, r: &SymMat, k21: &DMatrix<f64>) -> Result<()> {
        let ch = self.channel;
        if r.dim() != ch.m() || k21.shape() != (ch.n2(), ch.n1()) {
            return Err(SolverError::Shape(format!(
                "expected R {m}x{m} and K21 {}x{}, got R {}x{} and K21 {}x{}",
                ch.n2(),
                ch.n1(),
                r.dim(),
                r.dim(),
                k21.nrows(),
                k21.ncols(),
                m = ch.m()
            )));
        }
        Ok(())
    }

    pub fn gradient_at(&self, r: &SymMat, k21: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        self.check_shapes(r, k21)?;
        let p = self.pieces(r.as_matrix(), k21)?;
        let mut grad_x = self.dup.transpose_apply(p.grad_r.as_slice());
        self.cap_gradient(r.as_matrix(), &mut grad_x);
        let grad_y = self.rdup.transpose_apply(p.grad_k.as_slice());
        Ok((grad_x, grad_y))
    }

    /// Gradients and Hessian blocks:
    ///
    /// ```text
    /// ∇x   = Dᵀ vec(Z1 − Z2 + R⁻¹/t)
    /// ∇y   = D̃ᵀ vec((K+Q)⁻¹ − (1 + 1/t) K⁻¹)
    /// ∇²xx = −Dᵀ (Z1⊗Z1 − Z2⊗Z2 + R⁻¹⊗R⁻¹/t) D
    /// ∇²yy =  D̃ᵀ (−(K+Q)⁻¹⊗(K+Q)⁻¹ + (1 + 1/t) K⁻¹⊗K⁻¹) D̃
    /// ∇²xy = −Dᵀ (G⊗G) D̃,   G = Hᵀ (K+Q)⁻¹
    /// ```
    pub fn derivatives(&self, r: &SymMat, k: &NoiseCovariance) -> Result<DerivativeBundle> {
        self.derivatives_raw(r, k.k21())
    }

    pub(crate) fn derivatives_raw(&self, r: &SymMat, k21: &DMatrix<f64>) -> Result<DerivativeBundle> {
        self.check_shapes(r, k21)?;
        let rm = r.as_matrix();
        let p = self.pieces(rm, k21)?;
        let inv_t = 1.0 / self.t;

        let mut grad_x = self.dup.transpose_apply(p.grad_r.as_slice());
        self.cap_gradient(rm, &mut grad_x);
        let grad_y = self.rdup.transpose_apply(p.grad_k.as_slice());

        let xx_mid = kron(&p.z1, &p.z1) - kron(&p.z2, &p.z2) + kron(&p.r_inv, &p.r_inv) * inv_t;
        let mut hess_xx = -self.dup.sandwich(&xx_mid, &self.dup);
        if let Some(caps) = &self.caps {
            let m = self.channel.m();
            for (i, cap) in caps.per_antenna.iter().enumerate() {
                let k = vech_index(m, i, i);
                hess_xx[(k, k)] -= inv_t / (cap - rm[(i, i)]).powi(2);
            }
            if let Some(total) = caps.total {
                let w = inv_t / (total - rm.trace()).powi(2);
                for i in 0..m {
                    for j in 0..m {
                        hess_xx[(vech_index(m, i, i), vech_index(m, j, j))] -= w;
                    }
                }
            }
        }
        // K⁻¹⊗K⁻¹ − S⁻¹⊗S⁻¹ = D⊗K⁻¹ + S⁻¹⊗D with D = K⁻¹ − S⁻¹
        let yy_mid = kron(&p.k_minus_s, &p.k_inv) + kron(&p.s_inv, &p.k_minus_s) + kron(&p.k_inv, &p.k_inv) * inv_t;
        let hess_yy = self.rdup.sandwich(&yy_mid, &self.rdup);
        let g = self.channel.h_stack().transpose() * &p.s_inv;
        let hess_xy = -self.dup.sandwich(&kron(&g, &g), &self.rdup);

        let value_f = p.ln_det_s - p.ln_det_k - p.ln_det_e2;
        let value_ft = value_f + (p.ln_det_r - p.ln_det_k) * inv_t + self.cap_value(rm);
        let value_c = ln_det_i_plus(self.channel.h1(), rm) - p.ln_det_e2;
        Ok(DerivativeBundle {
            grad_x,
            grad_y,
            hess_xx: SymMat::symmetrized(hess_xx).into_matrix(),
            hess_yy: SymMat::symmetrized(hess_yy).into_matrix(),
            hess_xy,
            value_f,
            value_ft,
            value_c,
        })
    }

    /// Matrix gradients `Z1 − Z2` and `R⁻¹/t` plus `∇_K f_t`, used for KKT certificates.
    pub(crate) fn matrix_gradients(
        &self,
        r: &SymMat,
        k21: &DMatrix<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
        let p = self.pieces(r.as_matrix(), k21)?;
        Ok((&p.z1 - &p.z2, &p.r_inv / self.t, p.grad_k))
    }

    fn split(&self, z: &DVector<f64>) -> Result<(SymMat, DMatrix<f64>)> {
        let nx = vech_len(self.channel.m());
        let r = unvech(&z.rows(0, nx).into_owned())?;
        let k21 = DMatrix::from_column_slice(self.channel.n2(), self.channel.n1(), &z.as_slice()[nx..]);
        Ok((r, k21))
    }
}

impl BarrierProblem for BarrierObjective<'_> {
    fn x_len(&self) -> usize {
        vech_len(self.channel.m())
    }

    fn y_len(&self) -> usize {
        self.channel.n1() * self.channel.n2()
    }

    fn t(&self) -> f64 {
        self.t
    }

    fn equality(&self) -> Option<(&DVector<f64>, f64)> {
        self.a.as_ref().map(|a| (a, self.power))
    }

    fn gradient(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let (r, k21) = self.split(z)?;
        let (gx, gy) = self.gradient_at(&r, &k21)?;
        Ok(stack(&gx, &gy))
    }

    fn gradient_hessian(&self, z: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let (r, k21) = self.split(z)?;
        let d = self.derivatives_raw(&r, &k21)?;
        Ok((d.gradient(), d.hessian()))
    }

    fn rates(&self, z: &DVector<f64>) -> Result<(f64, f64)> {
        let (r, k21) = self.split(z)?;
        Ok((0.5 * raw_minimax(self.channel, r.as_matrix(), &k21)?, secrecy_rate(self.channel, &r)))
    }
}

/// `C(R) + ln|R|/t` for degraded channels, where `C` is concave and no noise
/// variable is needed. Log-det units.
#[derive(Debug, Clone)]
pub struct DegradedObjective<'a> {
    channel: &'a ChannelPair,
    t: f64,
    power: f64,
    dup: DuplicationMatrix,
    a: DVector<f64>,
}

impl<'a> DegradedObjective<'a> {
    pub fn new(channel: &'a ChannelPair, t: f64, power: f64) -> Result<Self> {
        if !(t > 0.0) || !(power > 0.0) || !t.is_finite() || !power.is_finite() {
            return Err(SolverError::InvalidInput("t and power must be positive".into()));
        }
        let m = channel.m();
        let mut a = DVector::zeros(vech_len(m));
        for i in 0..m {
            a[vech_index(m, i, i)] = 1.0;
        }
        Ok(Self { channel, t, power, dup: DuplicationMatrix::new(m), a })
    }

    pub fn at(&self, t: f64) -> Self {
        Self { t, ..self.clone() }
    }

    fn pieces(&self, r: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
        let ch = self.channel;
        let chol_r = spd(r, "R")?;
        let z_of = |h: &DMatrix<f64>, what: &str| -> Result<DMatrix<f64>> {
            let n = h.nrows();
            let e = SymMat::symmetrized(DMatrix::identity(n, n) + h * r * h.transpose()).into_matrix();
            let c = spd(&e, what)?;
            Ok(SymMat::symmetrized(h.transpose() * c.solve(h)).into_matrix())
        };
        Ok((z_of(ch.h1(), "I + H1 R H1ᵀ")?, z_of(ch.h2(), "I + H2 R H2ᵀ")?, spd_inverse(&chol_r)))
    }

    pub fn barrier_value(&self, r: &SymMat) -> Result<f64> {
        let chol = spd(r.as_matrix(), "R")?;
        Ok(2.0 * secrecy_rate(self.channel, r) + ln_det(&chol) / self.t)
    }
}

impl BarrierProblem for DegradedObjective<'_> {
    fn x_len(&self) -> usize {
        vech_len(self.channel.m())
    }

    fn y_len(&self) -> usize {
        0
    }

    fn t(&self) -> f64 {
        self.t
    }

    fn equality(&self) -> Option<(&DVector<f64>, f64)> {
        Some((&self.a, self.power))
    }

    fn gradient(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let r = unvech(z)?;
        let (z1, z2, r_inv) = self.pieces(r.as_matrix())?;
        let g = z1 - z2 + r_inv / self.t;
        Ok(self.dup.transpose_apply(g.as_slice()))
    }

    fn gradient_hessian(&self, z: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let r = unvech(z)?;
        let (z1, z2, r_inv) = self.pieces(r.as_matrix())?;
        let grad = self.dup.transpose_apply((&z1 - &z2 + &r_inv / self.t).as_slice());
        let mid = kron(&z1, &z1) - kron(&z2, &z2) + kron(&r_inv, &r_inv) / self.t;
        let hess = -self.dup.sandwich(&mid, &self.dup);
        Ok((grad, SymMat::symmetrized(hess).into_matrix()))
    }

    fn rates(&self, z: &DVector<f64>) -> Result<(f64, f64)> {
        let c = secrecy_rate(self.channel, &unvech(z)?);
        Ok((c, c))
    }
}
