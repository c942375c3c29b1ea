//! Experiment runner, CSV format, verification suites and CLI plumbing for
//! the `stochsort-core` algorithms.

pub mod algorithms;
pub mod cli;
pub mod config;
pub mod experiment;
pub mod suites;
pub mod table;

pub use algorithms::{AlgoFlags, AlgoSpec};
pub use config::{ConfigError, ExperimentConfig, SeedRange};
pub use experiment::{run_experiment, run_trials, summarize, CostSummary, TrialRow};
