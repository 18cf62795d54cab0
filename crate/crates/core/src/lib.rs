//! Numerical laboratory for contact processes with state-dependent birth and
//! death rates in the critical regime.
//!
//! The crate is `no_std` (it needs `alloc`). Everything that touches files,
//! threads or the command line lives in the `contactlab` companion crate.
//!
//! Module map:
//!
//! - [`model`]: state spaces, rate kernels and configurations.
//! - [`criticality`]: Perron ground state, rescaling to criticality and the
//!   ground-state transform `b = a/Ψ`, `m̄ = Ψ m`.
//! - [`hierarchy`]: correlation-function hierarchy, dense semigroup backend
//!   and the Feynman–Kac Monte Carlo backend.
//! - [`walkers`]: the auxiliary jump process, transience constant `H` and the
//!   heat-kernel / convolution / Poisson-domination checks.
//! - [`simulator`]: exact event-driven simulation of the particle system and
//!   empirical correlation functions.
#![no_std]

extern crate alloc;

pub mod criticality;
pub mod hierarchy;
pub mod linalg;
pub mod model;
pub mod replicas;
pub mod simulator;
pub mod stats;
pub mod walkers;

pub use criticality::{GroundState, Normalization, TransformedModel};
pub use hierarchy::{CorrelationTensor, HierarchySolution};
pub use model::{Configuration, Kernel, Point, RateModel, StateSpace};
pub use replicas::{ReplicaExecutor, Sequential};
