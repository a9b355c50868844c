//! Configuration-driven front end for the fold computations.

pub mod config;
pub mod pipeline;

pub use config::{ConfigError, Domain, Method, RunConfig, SweepKind};
pub use pipeline::{failure_record, run, sweep, write, Outcome, RunError};
