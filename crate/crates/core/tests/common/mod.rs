//! Independent reference computations shared by the integration tests. None of
//! these touch the solver; they evaluate `C(R)` directly and search over it.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use secrecy_core::rng::NormalSource;
use secrecy_core::matcalc::unvech;
use secrecy_core::{BarrierObjective, ChannelPair, NoiseCovariance, SymMat};

pub fn example_channel() -> ChannelPair {
    ChannelPair::new(
        DMatrix::from_row_slice(2, 2, &[0.77, -0.30, -0.32, -0.64]),
        DMatrix::from_row_slice(2, 2, &[0.54, -0.11, -0.93, -1.71]),
    )
    .unwrap()
}

pub fn random_channel(g: &mut NormalSource, m: usize, n1: usize, n2: usize) -> ChannelPair {
    let h1 = g.matrix(n1, m);
    let h2 = g.matrix(n2, m);
    ChannelPair::new(h1, h2).unwrap()
}

/// `W1 = W2 + L Lᵀ` with `H1` the transposed Cholesky factor of `W1`.
pub fn degraded_channel(g: &mut NormalSource, m: usize, n2: usize) -> ChannelPair {
    let h2 = g.matrix(n2, m);
    let l = g.matrix(m, m);
    let w1 = h2.transpose() * &h2 + &l * l.transpose();
    let c = nalgebra::Cholesky::new(w1).unwrap().l();
    ChannelPair::new(c.transpose(), h2).unwrap()
}

/// Random `R ≻ 0` with trace `power`, eigenvalues bounded away from zero.
pub fn random_r(g: &mut NormalSource, m: usize, power: f64) -> SymMat {
    let a = g.matrix(m, m);
    let r = &a * a.transpose() + DMatrix::identity(m, m) * 0.2;
    let r = &r * (power / r.trace());
    SymMat::new((&r + r.transpose()) * 0.5).unwrap()
}

/// Random `K21` with spectral norm `norm < 1`.
pub fn random_k21(g: &mut NormalSource, n1: usize, n2: usize, norm: f64) -> DMatrix<f64> {
    let k = g.matrix(n2, n1);
    let s = k.singular_values().max();
    k * (norm / s)
}

pub fn noise(k21: &DMatrix<f64>) -> NoiseCovariance {
    NoiseCovariance::new(k21.clone()).unwrap()
}

fn ln_det(m: &DMatrix<f64>) -> f64 {
    m.clone().lu().determinant().ln()
}

/// `½ ln(|I + W1 R| / |I + W2 R|)` from determinants of `I + H R Hᵀ`.
pub fn rate(ch: &ChannelPair, r: &DMatrix<f64>) -> f64 {
    let side = |h: &DMatrix<f64>| ln_det(&(DMatrix::identity(h.nrows(), h.nrows()) + h * r * h.transpose()));
    0.5 * (side(ch.h1()) - side(ch.h2()))
}

/// Best rank-one rate `max_θ C(P u uᵀ)` over `angles` directions `u = (cos θ, sin θ)`, `θ ∈ [0, π)`.
/// Rank one is optimal whenever `W1 − W2` has one positive eigenvalue.
pub fn beamforming_oracle(ch: &ChannelPair, power: f64, angles: usize) -> f64 {
    assert_eq!(ch.m(), 2);
    let (w1, w2) = (ch.w1().as_matrix(), ch.w2().as_matrix());
    let quad = |w: &DMatrix<f64>, c: f64, s: f64| w[(0, 0)] * c * c + 2.0 * w[(0, 1)] * c * s + w[(1, 1)] * s * s;
    (0..angles)
        .map(|k| {
            let th = std::f64::consts::PI * k as f64 / angles as f64;
            let (s, c) = th.sin_cos();
            // |I + P W u uᵀ| = 1 + P uᵀ W u
            0.5 * ((1.0 + power * quad(w1, c, s)).ln() - (1.0 + power * quad(w2, c, s)).ln())
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Classical water-filling: `½ Σ ln(1 + g_i p_i)` with `p_i = (ν − 1/g_i)⁺`, `Σ p_i = P`.
pub fn water_filling(gains: &[f64], power: f64) -> f64 {
    let mut g: Vec<f64> = gains.iter().copied().filter(|&x| x > 0.0).collect();
    g.sort_by(|a, b| b.partial_cmp(a).unwrap());
    for k in (1..=g.len()).rev() {
        let inv: f64 = g[..k].iter().map(|x| 1.0 / x).sum();
        let nu = (power + inv) / k as f64;
        if nu > 1.0 / g[k - 1] {
            return 0.5 * g[..k].iter().map(|x| (nu * x).ln()).sum::<f64>();
        }
    }
    0.0
}

/// Number of strictly active water-filling modes.
pub fn water_filling_modes(gains: &[f64], power: f64) -> usize {
    let mut g: Vec<f64> = gains.iter().copied().filter(|&x| x > 0.0).collect();
    g.sort_by(|a, b| b.partial_cmp(a).unwrap());
    (1..=g.len())
        .rev()
        .find(|&k| {
            let inv: f64 = g[..k].iter().map(|x| 1.0 / x).sum();
            (power + inv) / k as f64 > 1.0 / g[k - 1]
        })
        .unwrap_or(0)
}

/// `max_{0 ≤ r ≤ P} ½ ln((1 + w1 r)/(1 + w2 r))` on a uniform grid with `points` nodes.
pub fn scalar_grid(w1: f64, w2: f64, power: f64, points: usize) -> f64 {
    (0..points)
        .map(|k| {
            let r = power * k as f64 / (points - 1) as f64;
            0.5 * ((1.0 + w1 * r).ln() - (1.0 + w2 * r).ln())
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Parallel channels `H1 = diag(a)`, `H2 = diag(b)`, caps `r_ii ≤ P_i`, diagonal `R`,
/// searched on a `points × points` grid.
pub fn parallel_grid(a: [f64; 2], b: [f64; 2], caps: [f64; 2], points: usize) -> f64 {
    let term = |i: usize, r: f64| 0.5 * ((1.0 + a[i] * a[i] * r).ln() - (1.0 + b[i] * b[i] * r).ln());
    let mut best = f64::NEG_INFINITY;
    for i in 0..points {
        let r1 = caps[0] * i as f64 / (points - 1) as f64;
        for j in 0..points {
            let r2 = caps[1] * j as f64 / (points - 1) as f64;
            best = best.max(term(0, r1) + term(1, r2));
        }
    }
    best
}

/// Relative error `‖a − b‖ / ‖b‖`, falling back to absolute error for tiny `b`.
pub fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-8)
}

pub fn rel_err_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-8)
}

const FD_STEP: f64 = 1e-5;

fn split(z: &DVector<f64>, nx: usize, n1: usize, n2: usize) -> (SymMat, DMatrix<f64>) {
    let r = unvech(&z.rows(0, nx).into_owned()).unwrap();
    let k21 = DMatrix::from_column_slice(n2, n1, &z.as_slice()[nx..]);
    (r, k21)
}

pub fn fd_errors(obj: &BarrierObjective, r: &SymMat, k21: &DMatrix<f64>) -> (f64, f64) {
    let ch = obj.channel();
    let (nx, n1, n2) = (r.vech().len(), ch.n1(), ch.n2());
    let z0 = {
        let mut z = DVector::zeros(nx + n1 * n2);
        z.rows_mut(0, nx).copy_from(&r.vech());
        z.rows_mut(nx, n1 * n2).copy_from_slice(k21.as_slice());
        z
    };
    let value = |z: &DVector<f64>| {
        let (r, k) = split(z, nx, n1, n2);
        obj.barrier_value(&r, &noise(&k)).unwrap()
    };
    let grad = |z: &DVector<f64>| {
        let (r, k) = split(z, nx, n1, n2);
        let (gx, gy) = obj.gradient_at(&r, &k).unwrap();
        let mut g = DVector::zeros(z.len());
        g.rows_mut(0, nx).copy_from(&gx);
        g.rows_mut(nx, gy.len()).copy_from(&gy);
        g
    };
    let n = z0.len();
    let mut g_fd = DVector::zeros(n);
    let mut h_fd = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut zp = z0.clone();
        let mut zm = z0.clone();
        zp[i] += FD_STEP;
        zm[i] -= FD_STEP;
        g_fd[i] = (value(&zp) - value(&zm)) / (2.0 * FD_STEP);
        h_fd.set_column(i, &((grad(&zp) - grad(&zm)) / (2.0 * FD_STEP)));
    }
    let d = obj.derivatives(r, &noise(k21)).unwrap();
    (rel_err(&d.gradient(), &g_fd), rel_err_mat(&d.hessian(), &h_fd))
}

/// Worst gradient and Hessian errors over 20 random interior points.
pub fn check_channel(ch: &ChannelPair, g: &mut NormalSource) -> (f64, f64) {
    let mut worst = (0.0f64, 0.0f64);
    for k in 0..20 {
        let t = [1.0, 10.0, 100.0][k % 3];
        let power = 0.5 + 10.0 * g.uniform();
        let obj = BarrierObjective::new(ch, t, power).unwrap();
        let (share, norm) = (0.2 + 0.8 * g.uniform(), 0.1 + 0.7 * g.uniform());
        let r = random_r(g, ch.m(), power * share);
        let k21 = random_k21(g, ch.n1(), ch.n2(), norm);
        let (eg, eh) = fd_errors(&obj, &r, &k21);
        worst = (worst.0.max(eg), worst.1.max(eh));
    }
    worst
}
