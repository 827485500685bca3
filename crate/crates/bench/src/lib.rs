//! Experiment harness behind the `proxsvrg` command-line tool: config
//! parsing, problem setup, solver runs with artifacts, the step size grid,
//! theory diagnostics and the sparsity phase study.

pub mod commands;
pub mod config;
pub mod error;
pub mod fit;
pub mod runner;
pub mod setup;

pub use commands::{cmd_diagnose, cmd_gen, cmd_grid, cmd_phase, cmd_run, Outcome};
pub use config::{ExperimentConfig, ProblemKind, SolverName};
pub use error::{BenchError, Result};
