//! Harness library behind the `visco` executable: run configuration,
//! initial-data presets, the convergence study, consistency-check drivers,
//! and report/export serialization.

pub mod checks;
pub mod config;
pub mod error;
pub mod export;
pub mod preset;
pub mod report;
pub mod study;

pub use error::{CliError, Result};
