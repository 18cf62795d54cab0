//! Small dense numerics: matrix exponential of Metzler matrices and
//! Gauss–Legendre rules.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_traits::Float;

/// `exp(t G)` for a Metzler matrix `G` (non-negative off the diagonal) and
/// `t >= 0`.
///
/// Uses `G = P - cI` with `P >= 0`, a Taylor series for `exp(τP)` at a step
/// where `‖τP‖₁ <= 1/2`, then repeated squaring. Every intermediate is
/// entrywise non-negative, so the result is too.
pub fn expm_metzler(g: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let n = g.nrows();
    assert_eq!(n, g.ncols(), "expm needs a square matrix");
    assert!(t >= 0.0 && t.is_finite(), "expm needs a finite time t >= 0");
    if n == 0 || t == 0.0 {
        return DMatrix::identity(n, n);
    }
    let c = (0..n).map(|i| -g[(i, i)]).fold(0.0, f64::max);
    let mut p = g.clone();
    for i in 0..n {
        p[(i, i)] += c;
    }
    let norm = t * one_norm(&p);
    let s = if norm > 0.5 {
        Float::ceil(Float::log2(norm / 0.5)) as u32
    } else {
        0
    };
    let tau = t / Float::powi(2.0, s as i32);
    let tp = p * tau;

    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=40 {
        term = &term * &tp / k as f64;
        sum += &term;
        if one_norm(&term) <= 1e-18 * one_norm(&sum) {
            break;
        }
    }
    let mut e = sum * Float::exp(-c * tau);
    for _ in 0..s {
        e = &e * &e;
    }
    e
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Nodes and weights of the `q`-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre(q: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(q >= 1);
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    for i in 0..q.div_ceil(2) {
        let mut x = Float::cos(core::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(q, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(q, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = mid - half * x;
        nodes[q - 1 - i] = mid + half * x;
        weights[i] = half * w;
        weights[q - 1 - i] = half * w;
    }
    (nodes, weights)
}

/// `(P_q(x), P_q'(x))`.
fn legendre(q: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=q {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if q == 0 {
        return (1.0, 0.0);
    }
    let d = q as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Sum with pairwise splitting, reproducible for a fixed input order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}
