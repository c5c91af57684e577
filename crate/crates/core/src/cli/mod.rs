//! Configuration, built-in fixtures, the check runner and report output
//! behind the `canon` binary.

pub mod config;
pub mod fixtures;
pub mod json;
pub mod runner;
pub mod sampling;

pub use config::{CheckKind, ConfigError, Job, JobConfig};
pub use runner::{run, RunOutcome};
