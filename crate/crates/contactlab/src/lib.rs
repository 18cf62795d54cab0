//! File formats, parallel execution and the experiment runner built on
//! [`contactlab_core`].

pub mod commands;
pub mod config;
pub mod exec;
pub mod fft;
pub mod io;
pub mod manifest;

pub use commands::{execute, Command, RunError, RunOptions};
pub use config::{ExperimentConfig, LoadedConfig, ModelConfig};
pub use exec::Parallel;
pub use fft::FftConvolution;
pub use manifest::{Check, Manifest, Status};
