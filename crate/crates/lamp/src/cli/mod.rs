//! Batch front-end: experiment configs in, artifacts out, plus the
//! verification and risk-lab entry points used by the command line.

pub mod config;
pub mod runner;
pub mod seeds;
pub mod verify;

pub use config::{AnalyticPrior, ExperimentConfig};
pub use runner::{run, sweep, RunOutcome};
pub use verify::{verify_all, VerifyReport};
