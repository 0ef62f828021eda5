//! Configuration, orchestration and file output for the `nozzle` binary.

pub mod config;
pub mod output;
pub mod run;

pub use config::{ConfigError, RunConfig};
pub use run::{run_shear, run_solve, run_sweep, validate, Outcome, RunOptions};
