//! Prediction uncertainty of nonlinear least-squares models.
//!
//! Given a model `f(x, θ)`, a design `x̃`, observations `ỹ` and a known noise
//! level `σ`, the crate estimates the mean and variance of the prediction
//! `f(x, θ̂(x̃, ỹ))` with five estimators: Monte Carlo, linearization,
//! sigma points, McNamee-Stenger cubature and Lu-Darmofal cubature. Closed
//! forms for a separable quadratic model on orthogonal factorial designs
//! serve as ground truth in [`oracle`], and [`bench`] implements the
//! benchmark protocol.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the type
//! aliases at the crate root fix the scalar to `f64`.

pub mod bench;
pub mod designs;
pub mod domain;
pub mod error;
pub mod estimators;
pub mod lsq;
pub mod models;
pub mod oracle;
pub mod report;
pub mod scalar;

pub use domain::{
    evaluate, finite_difference_gradient, parameter_gradient, perturb_observations,
    stack_predictions, FnModel, Method, Model, ReportMetadata,
};
pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Design = domain::Design<f64>;
pub type ObservationSet = domain::ObservationSet<f64>;
pub type NoiseModel = domain::NoiseModel<f64>;
pub type ParameterEstimate = domain::ParameterEstimate<f64>;
pub type UncertaintyReport = domain::UncertaintyReport<f64>;
pub type CubatureRule = estimators::CubatureRule<f64>;
pub type SolverConfig = lsq::SolverConfig<f64>;
pub type QuadraticModel = models::QuadraticModel<f64>;
pub type NrtlModel = models::NrtlModel<f64>;
pub use models::ExponentialModel;
