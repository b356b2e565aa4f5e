//! Experiment harness: configuration, benchmark construction, runs, sweeps and checks.

pub mod config;
pub mod error;
pub mod problem;
pub mod run;
pub mod sweep;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use problem::{build_problem, BenchLoss, Problem};
pub use run::{run_experiment, run_on_problem, RunOutput, RunTrace};
pub use sweep::{participation_sweep, sweep, SweepReport};
pub mod presets;
pub mod verify;

pub use verify::{run_suite, Suite, SuiteReport};
