//! Closed forms for the separable quadratic model
//! `f(x, θ) = θ₀ + Σ_k α_k θ_k x_k + Σ_k β_k (θ_k²/2) x_k²`
//! on orthogonal factorial designs.

use crate::designs::check_orthogonal;
use crate::domain::{evaluate, parameter_gradient, Design, Model};
use crate::error::{check_len, Error, Result};
use crate::models::QuadraticModel;
use crate::scalar::Scalar;

/// Model, orthogonal design, noise level and optionally the true parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticOracleContext<T> {
    model: QuadraticModel<T>,
    design: Design<T>,
    sigma: T,
    theta_true: Option<Vec<T>>,
}

impl<T: Scalar> QuadraticOracleContext<T> {
    pub fn new(
        model: QuadraticModel<T>,
        design: Design<T>,
        sigma: T,
        theta_true: Option<Vec<T>>,
    ) -> Result<Self> {
        check_len("design dimension", model.dim_x(), design.dim_x())?;
        let report = check_orthogonal(&design);
        if !report.is_orthogonal() {
            let mut reasons = Vec::new();
            if !report.corners_ok {
                reasons.push("coordinates outside {-1, 1}");
            }
            if !report.zero_sum_ok {
                reasons.push("column sums are not zero");
            }
            if !report.orthogonality_ok {
                reasons.push("cross products are not n·δ_kl");
            }
            return Err(Error::NotOrthogonal(format!(
                "design `{}`: {}",
                design.label(),
                reasons.join("; ")
            )));
        }
        if !(sigma > T::zero()) {
            return Err(Error::InvalidArgument("sigma must be positive".into()));
        }
        if let Some(t) = &theta_true {
            check_len("theta_true", model.dim_theta(), t.len())?;
        }
        Ok(QuadraticOracleContext { model, design, sigma, theta_true })
    }

    pub fn model(&self) -> &QuadraticModel<T> {
        &self.model
    }

    pub fn design(&self) -> &Design<T> {
        &self.design
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn theta_true(&self) -> Option<&[T]> {
        self.theta_true.as_deref()
    }

    fn n(&self) -> T {
        T::from_count(self.design.n())
    }

    fn truth(&self) -> Result<&[T]> {
        self.theta_true.as_deref().ok_or(Error::Missing("theta_true"))
    }

    fn check_x(&self, x: &[T]) -> Result<()> {
        check_len("evaluation point", self.model.dim_x(), x.len())
    }

    /// `Σ_i x_ik v_i` for every input coordinate `k`.
    fn moments(&self, v: &[T]) -> Vec<T> {
        (0..self.model.dim_x())
            .map(|k| {
                self.design
                    .points()
                    .iter()
                    .zip(v)
                    .fold(T::zero(), |a, (p, vi)| a + p[k] * *vi)
            })
            .collect()
    }

    /// `Σ_k (β_k/α_k²)(x_k² − 1)`.
    fn curvature_sum(&self, x: &[T]) -> T {
        let (a, b) = (self.model.alpha(), self.model.beta());
        (0..x.len()).fold(T::zero(), |s, k| s + b[k] / (a[k] * a[k]) * (x[k] * x[k] - T::one()))
    }

    /// `(σ²/n)(1 + Σ_k (x_k + (β_k/α_k)(x_k² − 1) θ_k)²)`.
    fn linear_term(&self, theta: &[T], x: &[T]) -> T {
        let (a, b) = (self.model.alpha(), self.model.beta());
        let s = (0..x.len()).fold(T::zero(), |s, k| {
            let t = x[k] + b[k] / a[k] * (x[k] * x[k] - T::one()) * theta[k + 1];
            s + t * t
        });
        self.sigma * self.sigma / self.n() * (T::one() + s)
    }

    /// The unique least-squares estimator of `obs`.
    pub fn exact_ls_estimator(&self, obs: &[T]) -> Result<Vec<T>> {
        check_len("observations", self.design.n(), obs.len())?;
        let n = self.n();
        let (a, b) = (self.model.alpha(), self.model.beta());
        let s = self.moments(obs);
        let mean = obs.iter().fold(T::zero(), |acc, v| acc + *v) / n;
        let mut theta = vec![T::zero(); s.len() + 1];
        let mut correction = T::zero();
        for k in 0..s.len() {
            theta[k + 1] = s[k] / (a[k] * n);
            correction += b[k] / (T::lit(2.0) * a[k] * a[k] * n * n) * s[k] * s[k];
        }
        theta[0] = mean - correction;
        Ok(theta)
    }

    /// `μ(x) = f(x, θ*) + (σ²/2n) Σ_k (β_k/α_k²)(x_k² − 1)`.
    pub fn exact_expected_prediction(&self, x: &[T]) -> Result<T> {
        self.check_x(x)?;
        let f = evaluate(&self.model, x, self.truth()?)?;
        Ok(f + self.sigma * self.sigma / (T::lit(2.0) * self.n()) * self.curvature_sum(x))
    }

    /// Exact prediction variance.
    pub fn exact_prediction_uncertainty(&self, x: &[T]) -> Result<T> {
        self.check_x(x)?;
        let theta = self.truth()?;
        let (a, b) = (self.model.alpha(), self.model.beta());
        let n = self.n();
        let s4 = self.sigma.powi(4);
        let quad = (0..x.len()).fold(T::zero(), |s, k| {
            let t = x[k] * x[k] - T::one();
            s + b[k] * b[k] / a[k].powi(4) * t * t
        });
        Ok(self.linear_term(theta, x) + s4 / (T::lit(2.0) * n * n) * quad)
    }

    /// Linearization approximation at the estimate `θ̄`.
    pub fn exact_linearized_uncertainty(&self, theta_bar: &[T], x: &[T]) -> Result<T> {
        self.check_x(x)?;
        check_len("theta_bar", self.model.dim_theta(), theta_bar.len())?;
        Ok(self.linear_term(theta_bar, x))
    }

    /// Sigma-point approximation at `θ̄` with hyperparameter `κ`.
    pub fn exact_sigma_point_uncertainty(&self, theta_bar: &[T], kappa: T, x: &[T]) -> Result<T> {
        let d = self.design.n();
        if !(kappa > -T::from_count(d)) {
            return Err(Error::InvalidArgument(format!("kappa must exceed -{d}, got {kappa}")));
        }
        let lin = self.exact_linearized_uncertainty(theta_bar, x)?;
        let n = self.n();
        let c = self.curvature_sum(x);
        Ok(lin + kappa / n * self.sigma.powi(4) / (T::lit(4.0) * n * n) * c * c)
    }

    /// Least-squares estimator of the model linearized at `θ̄`.
    pub fn exact_linearized_ls_estimator(&self, theta_bar: &[T], obs: &[T]) -> Result<Vec<T>> {
        check_len("observations", self.design.n(), obs.len())?;
        check_len("theta_bar", self.model.dim_theta(), theta_bar.len())?;
        let n = self.n();
        let (a, b) = (self.model.alpha(), self.model.beta());
        let z: Vec<T> = self
            .design
            .points()
            .iter()
            .zip(obs)
            .map(|(x, y)| {
                let f = evaluate(&self.model, x, theta_bar)?;
                let g = parameter_gradient(&self.model, x, theta_bar)?;
                let offset = f - g.iter().zip(theta_bar).fold(T::zero(), |s, (gj, tj)| s + *gj * *tj);
                Ok(*y - offset)
            })
            .collect::<Result<_>>()?;
        let s = self.moments(&z);
        let mean = z.iter().fold(T::zero(), |acc, v| acc + *v) / n;
        let mut theta = vec![T::zero(); s.len() + 1];
        let mut correction = T::zero();
        for k in 0..s.len() {
            theta[k + 1] = s[k] / (a[k] * n);
            correction += b[k] * theta_bar[k + 1] / (a[k] * n) * s[k];
        }
        theta[0] = mean - correction;
        Ok(theta)
    }
}
