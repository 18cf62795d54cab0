//! Correlation-function hierarchy: operators, time evolution, stationary
//! solutions and their bounds.
//!
//! Densities are taken with respect to `m̄`. Level `n` obeys
//! `∂k⁽ⁿ⁾/∂t = L̂ₙ k⁽ⁿ⁾ + f⁽ⁿ⁾` with `f⁽ⁿ⁾` built from level `n − 1`.

mod dense;
mod montecarlo;
mod operators;
mod tensor;

use alloc::vec::Vec;

use num_traits::Float;

pub use dense::{
    convergence_check_dense, evolve, integrate_semigroup, poisson_initial, stationary_dense, ConvergenceReport,
    DenseStationary, EvolveControls, PoissonInitial, StationaryControls, Trajectory,
};
pub use montecarlo::{
    convergence_check_mc, stationary_pair_mc, McConvergenceReport, PairCorrelation, PairCorrelationEntry,
    PairMcControls,
};
pub use operators::{apply_lhat, source_f, Semigroup};
pub use tensor::CorrelationTensor;

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceDiagnostics {
    pub order: usize,
    /// Time at which divergence was declared.
    pub time: f64,
    /// Mean integrand over the last panel.
    pub integrand: f64,
    pub integrand_three_decades_earlier: f64,
    /// Sup-norm of the running integral.
    pub integral: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HierarchyError {
    #[error("the dense backend needs a finite model")]
    NotDense,
    #[error("expected order {expected}, got {got}")]
    OrderMismatch { expected: usize, got: usize },
    #[error("requested times must be finite, non-negative and sorted")]
    InvalidTimes,
    #[error("time stepping error estimate {estimate} above tolerance at step {step}")]
    Accuracy { estimate: f64, step: f64 },
    #[error("stationary integral diverges at order {}: integrand {} at t = {}", .0.order, .0.integrand, .0.time)]
    Divergence(DivergenceDiagnostics),
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
    #[error(transparent)]
    Walker(alloc::boxed::Box<crate::walkers::WalkerError>),
}

/// Stationary correlation functions with the constants of the factorial bound.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchySolution {
    pub rho: f64,
    /// Levels `1..=N`.
    pub tensors: Vec<CorrelationTensor>,
    pub h_used: f64,
    pub d_const: f64,
}

impl HierarchySolution {
    pub fn new(rho: f64, tensors: Vec<CorrelationTensor>, h_used: f64) -> Self {
        Self {
            rho,
            tensors,
            h_used,
            d_const: d_constant(rho, h_used),
        }
    }
}

/// `D = Σ_{n≥1} (ρ/H)ⁿ / (n!)²`.
pub fn d_constant(rho: f64, h: f64) -> f64 {
    let x = rho / h;
    let mut term = 1.0;
    let mut sum = 0.0;
    for n in 1..1000u32 {
        term *= x / (n as f64 * n as f64);
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
    }
    sum
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorialRow {
    pub n: usize,
    pub value: f64,
    pub stderr: f64,
    pub bound: f64,
    /// `value / bound`.
    pub ratio: f64,
    /// `(value − 3·stderr) / bound`, the figure the verdict uses.
    pub ratio_lower: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorialReport {
    pub h: f64,
    pub d: f64,
    pub rows: Vec<FactorialRow>,
    pub pass: bool,
}

/// Compare `sup k⁽ⁿ⁾` with `D Hⁿ (n!)²`. `sups[n - 1]` is `(value, stderr)`
/// for level `n`; exact values have zero stderr.
pub fn factorial_bound(rho: f64, h: f64, sups: &[(f64, f64)]) -> FactorialReport {
    let d = d_constant(rho, h);
    let mut fact = 1.0;
    let rows: Vec<FactorialRow> = sups
        .iter()
        .enumerate()
        .map(|(i, &(value, stderr))| {
            let n = i + 1;
            fact *= n as f64;
            let bound = d * Float::powi(h, n as i32) * fact * fact;
            let ratio_lower = (value - 3.0 * stderr) / bound;
            FactorialRow {
                n,
                value,
                stderr,
                bound,
                ratio: value / bound,
                ratio_lower,
                pass: ratio_lower <= 1.0,
            }
        })
        .collect();
    let pass = rows.iter().all(|r| r.pass);
    FactorialReport { h, d, rows, pass }
}

pub fn factorial_bound_check(sol: &HierarchySolution) -> FactorialReport {
    let sups: Vec<(f64, f64)> = sol.tensors.iter().map(|t| (t.max(), 0.0)).collect();
    factorial_bound(sol.rho, sol.h_used, &sups)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_level_always_within_bound() {
        for &(rho, h) in &[(0.5, 1.0), (3.0, 0.1), (0.01, 20.0)] {
            let r = factorial_bound(rho, h, &[(rho, 0.0)]);
            assert!(r.rows[0].ratio <= 1.0);
            assert!(r.d >= rho / h);
        }
    }

    #[test]
    fn inflated_second_level_fails() {
        let r = factorial_bound(1.0, 1.0, &[(1.0, 0.0), (1e3, 0.0)]);
        assert!(!r.pass);
    }

    #[test]
    fn d_constant_series() {
        let x: f64 = 0.7;
        let want = x + x * x / 4.0 + x.powi(3) / 36.0 + x.powi(4) / 576.0 + x.powi(5) / 14400.0;
        assert!((d_constant(0.7, 1.0) - want).abs() < 1e-6);
    }
}
