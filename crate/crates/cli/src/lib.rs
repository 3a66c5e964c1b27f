//! Experiment configuration and the prepare/train/evaluate pipeline behind
//! the `dilp` binary.

pub mod config;
pub mod pipeline;

pub use config::ExperimentConfig;
pub use pipeline::{prepare, run, Outcome, Prepared};
