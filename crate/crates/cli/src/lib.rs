//! Config-driven experiment runner for evolutionary bagging and its baselines.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;

pub use commands::{execute, Verb};
pub use config::{ExperimentConfig, ModelKind};
pub use error::CliError;
