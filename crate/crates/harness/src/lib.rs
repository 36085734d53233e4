//! Experiment harness for the saddle-point solvers: runs configured
//! experiments and writes plot-ready traces, checks the convergence
//! certificates on random instances, grid-searches step sizes and reports
//! the constants of an instance.

// `!(a <= b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod estimate;
pub mod grid;
pub mod instance;
pub mod runner;
pub mod solve;
pub mod verify;

pub use config::{Axis, ExperimentConfig, GridSpec, InstanceSpec, ScheduleSource, SolverKind, SolverSpec, StepParams, StoppingSpec};
pub use error::{HarnessError, Result};
pub use estimate::{cmd_estimate, EstimateReport};
pub use grid::{run_grid, GridResult, GridRow, PointStatus};
pub use instance::{Instance, TheoryParams};
pub use solve::{cmd_grid, cmd_solve, Overrides, SolverStatus, SolverSummary, Summary};
pub use verify::{cmd_verify, Suite, VerifyOptions, VerifyReport};
