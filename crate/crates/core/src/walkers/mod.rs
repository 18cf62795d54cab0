//! The auxiliary jump process: one walker holds at `x` for an `Exp(V(x))`
//! time and jumps according to `b(x,·) m̄ / V(x)`.
//!
//! Two independent copies give the transience constant `H`; single walkers
//! and the mark chain feed the heat-kernel, convolution, Poisson-domination
//! and lower-tail checks.

mod convolution;
mod law;
mod lemmas;
mod pair;
mod path;

pub use convolution::{
    convolution_bound_check, power_tables, ConvolutionEngine, ConvolutionReport, DirectConvolution, LatticeDensity,
};
pub use law::{DenseSampler, LatticeSampler};
pub use lemmas::{
    heat_bound_check, log_grid, lower_tail_bound_check, poisson_domination_check, HeatReport, HeatRow, LowerTailReport,
    LowerTailRow, PoissonCell, PoissonDominationReport,
};
pub use pair::{
    checkpoint_grid, default_grid, estimate_h, estimate_h_dense, estimate_h_sufficient, estimate_pairs,
    pair_running_integrals, PairEstimate, PairFunctional, PairStart, TransienceControls, TransienceReport, Variant,
};
pub(crate) use path::holding as path_holding;
pub use path::{mark_chain_jumps, path_integral, simulate_jump, WalkerPath, WalkerState};

use crate::hierarchy::HierarchyError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WalkerError {
    #[error("walker needs a translation-invariant model on the unbounded lattice")]
    NotLattice,
    #[error("walker needs a finite model")]
    NotDense,
    #[error("jump law at state {state} has mass {mass}, expected 1")]
    NotNormalized { state: usize, mass: f64 },
    #[error("start point is not in the state space")]
    InvalidStart,
    #[error("convolution power {n} lost mass {deficit}")]
    MassLeakage { n: usize, deficit: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
}
