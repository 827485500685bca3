//! Proximal stochastic variance reduced gradient methods for composite
//! finite-sum problems with norm-ball side constraints.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the bottom of this file fix the precision for the common cases.

pub mod data;
pub mod error;
pub mod losses;
pub mod optimizers;
pub mod problem;
pub mod regularizers;
pub mod scalar;
pub mod theory;

pub use error::{Error, Result};
pub use losses::{component_gradient, full_gradient, smoothness_bound, LossKind, SmoothnessBound};
pub use problem::{feasibility_check, objective_value, CompositeProblem, Dataset, ProblemSummary};
pub use regularizers::{
    constrained_prox, convexified_penalty, dual_norm, penalty_value, subspace_compatibility, subspace_split,
    GroupMap, Regularizer, SubspaceModel,
};
pub use scalar::Scalar;

pub type Dataset64 = problem::Dataset<f64>;
pub type Dataset32 = problem::Dataset<f32>;
pub type Problem64 = problem::CompositeProblem<f64>;
pub type Problem32 = problem::CompositeProblem<f32>;
pub type Loss64 = losses::LossKind<f64>;
pub type Regularizer64 = regularizers::Regularizer<f64>;
pub type Config64 = optimizers::OptimizerConfig<f64>;
pub type Trace64 = optimizers::RunTrace<f64>;
pub type Trace32 = optimizers::RunTrace<f32>;
