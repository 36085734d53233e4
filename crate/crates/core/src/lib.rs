//! Solvers for bilinear convex-concave saddle point problems
//!
//! ```text
//! min_x max_y  L(x, y) = f(x) + yᵀAx − g(y)
//! ```
//!
//! with `f` convex and smooth, `g` strongly convex and smooth, and `A` of full
//! column rank. The crate provides the simultaneous primal-dual gradient
//! method, primal-dual SVRG for finite sums, the step sizes and contraction
//! rates that certify their linear convergence, potential-function
//! diagnostics, and the problem families used to exercise them.
//!
//! Everything is generic over a [`Scalar`] (`f32` or `f64`); the `*F64` and
//! `*F32` aliases name the common instantiations.

// `!(a <= b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod function;
pub mod instances;
pub mod linalg;
pub mod problem;
pub mod scalar;
pub mod solvers;
pub mod svrg;
pub mod theory;
pub mod trace;

pub use error::{Error, Result};
pub use function::{CoordinateQuadratic, FnOracle, FunctionRef, Quadratic, SmoothFunction, SmoothedL1};
pub use instances::gaussian::{gaussian_data, CovarianceSpec};
pub use instances::mspbe::{random_mspbe, MspbeInstance};
pub use instances::quadratic::{random_quadratic, QuadraticSaddle, QuadraticSpec};
pub use instances::regression::SmoothedL1Regression;
pub use instances::InstanceDocument;
pub use problem::{check_gradients, check_gradients_self, random_points, GradientCheckReport, Iterate, SaddleProblem, SmoothnessParams};
pub use scalar::Scalar;
pub use solvers::{pdg_step, reference_solution, run_pdg, run_primal_gd, PdgSteps, ReferenceMode, ReferenceSolution, Run, RunOptions, StoppingRule};
pub use svrg::{run_pdsvrg, run_primal_svrg, Component, Coupling, FiniteSumSaddleProblem, PrimalFiniteSum, SnapshotRule, SvrgConfig};
pub use theory::{ghost_step, pdg_schedule, potential_p, potential_q, potential_r, sc_schedule, PdgSchedule, ScSchedule, StepInequalities};
pub use trace::{PotentialKind, StopReason, Trace, TraceRow};

pub type SaddleProblemF64 = SaddleProblem<f64>;
pub type SaddleProblemF32 = SaddleProblem<f32>;
pub type FiniteSumSaddleProblemF64 = FiniteSumSaddleProblem<f64>;
pub type FiniteSumSaddleProblemF32 = FiniteSumSaddleProblem<f32>;
pub type IterateF64 = Iterate<f64>;
pub type IterateF32 = Iterate<f32>;
pub type SmoothnessParamsF64 = SmoothnessParams<f64>;
pub type PdgScheduleF64 = PdgSchedule<f64>;
pub type ScScheduleF64 = ScSchedule<f64>;
pub type SvrgConfigF64 = SvrgConfig<f64>;
pub type QuadraticSaddleF64 = QuadraticSaddle<f64>;
pub type SmoothedL1RegressionF64 = SmoothedL1Regression<f64>;
pub type MspbeInstanceF64 = MspbeInstance<f64>;
