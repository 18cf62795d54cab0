//! Monte Carlo accumulators and Poisson probabilities.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

/// Running sums of a vector of per-replica values.
#[derive(Debug, Clone, PartialEq)]
pub struct VecAccumulator {
    pub count: u64,
    pub sum: Vec<f64>,
    pub sumsq: Vec<f64>,
}

impl VecAccumulator {
    pub fn new(width: usize) -> Self {
        Self {
            count: 0,
            sum: vec![0.0; width],
            sumsq: vec![0.0; width],
        }
    }

    pub fn width(&self) -> usize {
        self.sum.len()
    }

    pub fn push(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.sum.len());
        self.count += 1;
        for ((s, q), &v) in self.sum.iter_mut().zip(&mut self.sumsq).zip(values) {
            *s += v;
            *q += v * v;
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.count += other.count;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sumsq.iter_mut().zip(&other.sumsq) {
            *a += b;
        }
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.sum[i] / self.count as f64
    }

    /// Standard error of the mean.
    pub fn stderr(&self, i: usize) -> f64 {
        let n = self.count as f64;
        if self.count < 2 {
            return f64::INFINITY;
        }
        let m = self.sum[i] / n;
        let var = ((self.sumsq[i] - n * m * m) / (n - 1.0)).max(0.0);
        Float::sqrt(var / n)
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.width()).map(|i| self.mean(i)).collect()
    }

    pub fn stderrs(&self) -> Vec<f64> {
        (0..self.width()).map(|i| self.stderr(i)).collect()
    }
}

/// Merge accumulators pairwise in slice order.
pub fn merge_pairwise(parts: &[VecAccumulator], width: usize) -> VecAccumulator {
    match parts.len() {
        0 => VecAccumulator::new(width),
        1 => parts[0].clone(),
        n => {
            let (a, b) = parts.split_at(n / 2);
            let mut left = merge_pairwise(a, width);
            left.merge(&merge_pairwise(b, width));
            left
        }
    }
}

/// `P(N = k)` for `N ~ Poisson(λ)`.
pub fn poisson_pmf(lambda: f64, k: u64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let lk = k as f64 * Float::ln(lambda) - lambda - ln_factorial(k);
    Float::exp(lk)
}

/// `P(N <= k)` for `N ~ Poisson(λ)`.
pub fn poisson_cdf(lambda: f64, k: u64) -> f64 {
    if lambda == 0.0 {
        return 1.0;
    }
    let mut term = Float::exp(-lambda);
    let mut sum = term;
    for j in 1..=k {
        term *= lambda / j as f64;
        sum += term;
    }
    sum.min(1.0)
}

pub fn ln_factorial(k: u64) -> f64 {
    if k < 2 {
        return 0.0;
    }
    if k <= 256 {
        return (2..=k).map(|j| Float::ln(j as f64)).sum();
    }
    let x = k as f64 + 1.0;
    // Stirling series for ln Γ(x)
    (x - 0.5) * Float::ln(x) - x + 0.5 * Float::ln(2.0 * core::f64::consts::PI) + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x * x * x)
}
