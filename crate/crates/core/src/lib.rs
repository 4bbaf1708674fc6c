//! Tabular MDP planning with twice-regularized (R²) Bellman operators.
//!
//! R² operators subtract a policy- and value-dependent penalty from the
//! nominal Bellman update and reproduce the value of a robust MDP with ball
//! uncertainty sets, without solving an inner minimization at every step.
//! The crate also ships the direct robust oracle those operators are checked
//! against, the planners that run either family, an exact policy gradient for
//! reward-robust objectives, and the benchmark environments.

pub mod environments;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod mdp;
pub mod norm;
pub mod planners;
pub mod policy_gradient;
pub mod r2;
pub mod regularizers;
pub mod robust;
pub mod uncertainty;

pub use error::{Error, Result};
pub use mdp::{OccupancyMeasure, Policy, QFn, SignedModel, TabularMdp, ValueFn};
pub use norm::NormOrder;
pub use r2::{GreedySolver, R2Config};
pub use regularizers::RegularizerKind;
pub use uncertainty::{BallUncertainty, SaBallUncertainty, Uncertainty};
