use alloc::boxed::Box;
use alloc::vec::Vec;

use num_traits::Float;

use super::{DivergenceDiagnostics, HierarchyError};
use crate::criticality::TransformedModel;
use crate::replicas::ReplicaExecutor;
use crate::walkers::{estimate_pairs, PairEstimate, PairFunctional, PairStart, TransienceControls, WalkerError};

const CONVERGENCE_SEED_SHIFT: u64 = 0x9e37_79b9_7f4a_7c15;

impl From<WalkerError> for HierarchyError {
    fn from(e: WalkerError) -> Self {
        match e {
            WalkerError::Hierarchy(h) => h,
            other => HierarchyError::Walker(Box::new(other)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMcControls {
    pub horizon: f64,
    pub replicas: u64,
    pub per_decade: usize,
    pub decades: usize,
}

impl Default for PairMcControls {
    fn default() -> Self {
        Self {
            horizon: 1000.0,
            replicas: 100_000,
            per_decade: 8,
            decades: 4,
        }
    }
}

impl PairMcControls {
    fn walker(&self) -> TransienceControls {
        TransienceControls {
            horizon: self.horizon,
            replicas: self.replicas,
            per_decade: self.per_decade,
            decades: self.decades,
            functional: PairFunctional::Symmetrized,
            ..TransienceControls::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairCorrelationEntry {
    pub start: PairStart,
    /// `k⁽²⁾ = ρ² + ρ E ∫₀^∞ (b + b̃)(X_t, Y_t) dt`.
    pub value: f64,
    pub stderr: f64,
    pub estimate: PairEstimate,
}

/// Stationary second correlation function of a lattice model on a grid of
/// start pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCorrelation {
    pub rho: f64,
    pub entries: Vec<PairCorrelationEntry>,
}

impl PairCorrelation {
    /// Largest `value + 3 stderr` over the grid with its stderr.
    pub fn sup(&self) -> (f64, f64) {
        self.entries
            .iter()
            .map(|e| (e.value, e.stderr))
            .fold((f64::NEG_INFINITY, 0.0), |a, b| if b.0 + 3.0 * b.1 > a.0 + 3.0 * a.1 { b } else { a })
    }
}

fn divergence(e: &PairEstimate) -> HierarchyError {
    let n = e.mean.len();
    let last = n - 1;
    HierarchyError::Divergence(DivergenceDiagnostics {
        order: 2,
        time: e.checkpoints[last],
        integrand: e.integrand_exponent,
        integrand_three_decades_earlier: f64::NAN,
        integral: e.mean[last],
    })
}

/// Feynman–Kac estimate of `k_ρ⁽²⁾` at each start pair. Fails with a
/// divergence error when the running integral does not decay fast enough.
pub fn stationary_pair_mc<E: ReplicaExecutor + ?Sized>(
    tm: &TransformedModel,
    rho: f64,
    starts: &[PairStart],
    controls: &PairMcControls,
    exec: &E,
    seed: u64,
) -> Result<PairCorrelation, HierarchyError> {
    let est = estimate_pairs(tm, starts, &controls.walker(), exec, seed)?;
    if let Some(bad) = est.iter().find(|e| !e.converged) {
        return Err(divergence(bad));
    }
    let entries = est
        .into_iter()
        .map(|e| PairCorrelationEntry {
            start: e.start.clone(),
            value: rho * rho + rho * e.extrapolated,
            stderr: rho * e.extrapolated_stderr,
            estimate: e,
        })
        .collect();
    Ok(PairCorrelation { rho, entries })
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConvergenceReport {
    pub times: Vec<f64>,
    /// `max` over the grid of `|k_t⁽²⁾ − k_ρ⁽²⁾|`.
    pub distances: Vec<f64>,
    /// Combined standard error of the maximizing entry.
    pub stderrs: Vec<f64>,
    pub final_distance: f64,
    pub final_stderr: f64,
    pub pass: bool,
}

/// Distance of the Poisson-started `k_t⁽²⁾ = ρ² + ρ E ∫₀^t (b + b̃)` from
/// the stationary value. The two are estimated from independent replica
/// sets; `k_t` is read off the checkpoints up to `final_time` and `k_ρ`
/// comes from `stationary` (which should reach past `final_time`).
pub fn convergence_check_mc<E: ReplicaExecutor + ?Sized>(
    tm: &TransformedModel,
    rho: f64,
    starts: &[PairStart],
    final_time: f64,
    transient: &PairMcControls,
    stationary: &PairMcControls,
    exec: &E,
    seed: u64,
) -> Result<McConvergenceReport, HierarchyError> {
    let k_rho = stationary_pair_mc(tm, rho, starts, stationary, exec, seed)?;
    let controls = PairMcControls {
        horizon: final_time,
        ..*transient
    };
    let running = estimate_pairs(tm, starts, &controls.walker(), exec, seed ^ CONVERGENCE_SEED_SHIFT)?;
    let times = running[0].checkpoints.clone();
    let mut distances = Vec::with_capacity(times.len());
    let mut stderrs = Vec::with_capacity(times.len());
    for j in 0..times.len() {
        let mut best = (f64::NEG_INFINITY, 0.0);
        for (r, s) in running.iter().zip(&k_rho.entries) {
            let k_t = rho * rho + rho * r.mean[j];
            let d = (k_t - s.value).abs();
            let se = Float::sqrt(Float::powi(rho * r.stderr[j], 2) + s.stderr * s.stderr);
            if d > best.0 {
                best = (d, se);
            }
        }
        distances.push(best.0);
        stderrs.push(best.1);
    }
    let final_distance = *distances.last().expect("non-empty grid");
    let final_stderr = *stderrs.last().expect("non-empty grid");
    Ok(McConvergenceReport {
        times,
        distances,
        stderrs,
        final_distance,
        final_stderr,
        pass: final_distance <= 3.0 * final_stderr,
    })
}
