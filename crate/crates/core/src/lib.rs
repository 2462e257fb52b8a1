//! Simulation-based bias reduction for parametric models.
//!
//! The crate computes the fixed point of the bias-correction map
//! `T(theta, n) = theta_tilde - { pi*(theta, n) - theta }` for any model
//! implementing the simulate/estimate contract, where `pi*` is a
//! fixed-seed replica average of the estimator. Built-in model families:
//! closed-form scalar toys, logistic regression (maximum likelihood and a
//! bounded-influence robust estimator on pseudo-values), and the
//! random-intercept logistic GLMM. A Monte Carlo harness reproduces the
//! bias/RMSE experiment designs at configurable scale.

pub mod config;
pub mod ghq;
pub mod glmm;
pub mod ib;
pub mod linalg;
pub mod logistic;
pub mod mc;
pub mod model;
pub mod optim;
pub mod param;
pub mod robust;
pub mod stream;
pub mod toy;

pub use ib::{
    ib_step, solve_fixed_point, surrogate_pi, FailurePolicy, IbResult, SimulationBudget,
};
pub use model::{EstimateError, SimulableModel};
pub use param::{project_to_domain, DomainBounds, ParamVector};
pub use stream::{derive_stream, tag, RandomStream, StreamKey, Tag, TagLabel};
