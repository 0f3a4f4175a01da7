//! Experiment runner for constraint-relaxed HMC: configuration, the named
//! experiments, and CSV/JSON output.

pub mod config;
pub mod experiments;
pub mod output;
pub mod stats;
pub mod summary;

pub use config::{Experiment, ExperimentConfig, ResolvedConfig};
pub use experiments::{resolve, run, Outcome};
