//! Prediction-uncertainty estimators: Monte Carlo, linearization, sigma
//! points, and the McNamee-Stenger and Lu-Darmofal degree-5 cubature rules.

mod cubature;
mod linearization;
mod monte_carlo;
mod rules;
pub mod sobol;
mod sobol_data;

pub use cubature::{cubature_at, cubature_parameter_samples, cubature_uncertainty};
pub use linearization::{linearization_at, linearization_uncertainty};
pub use monte_carlo::{
    mc_moments, mc_parameter_samples, mc_uncertainty, McConfig, McParameterSamples,
};
pub use rules::{
    default_kappa, degree5_exactness_check, gaussian_moment, lu_darmofal_rule,
    mcnamee_stenger_rule, polynomial_scale, sigma_point_rule, simplex_directions, CubatureRule,
    Monomial, SigmaPointConfig,
};
pub use sobol::{inverse_normal_cdf, sobol_normal, NormalStream, SequenceKind};

use crate::lsq::SolverConfig;
use crate::scalar::Scalar;

/// Least-squares settings shared by all estimators: the initial guess and
/// solver configuration for the fit of the available observations, and the
/// configuration of the warm-started inner fits.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings<T> {
    pub init: Vec<T>,
    pub outer: SolverConfig<T>,
    pub inner: SolverConfig<T>,
}

impl<T: Scalar> SolverSettings<T> {
    pub fn new(init: Vec<T>) -> Self {
        SolverSettings {
            init,
            outer: SolverConfig::outer(),
            inner: SolverConfig::inner(),
        }
    }

    /// Applies the same parameter box to the outer and the inner fits.
    pub fn with_bounds(mut self, bounds: Option<(Vec<T>, Vec<T>)>) -> Self {
        self.outer.bounds = bounds.clone();
        self.inner.bounds = bounds;
        self
    }
}
