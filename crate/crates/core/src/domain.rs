//! Domain types shared by every module: the model contract, designs,
//! observations, noise, parameter estimates and uncertainty reports.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

/// A scalar-valued regression model `f(x, θ)`.
///
/// Implementations must be deterministic and free of interior mutability so
/// that they can be evaluated concurrently from many threads.
pub trait Model<T: Scalar>: Send + Sync {
    /// Short identifier used in reports.
    fn id(&self) -> &str;

    fn dim_x(&self) -> usize;

    fn dim_theta(&self) -> usize;

    /// Evaluates the model. Dimensions have already been checked by the caller.
    fn eval_raw(&self, x: &[T], theta: &[T]) -> Result<T>;

    /// Analytic parameter gradient, if the model provides one.
    fn gradient_raw(&self, _x: &[T], _theta: &[T]) -> Option<Result<Vec<T>>> {
        None
    }
}

impl<T: Scalar, M: Model<T> + ?Sized> Model<T> for &M {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn dim_x(&self) -> usize {
        (**self).dim_x()
    }
    fn dim_theta(&self) -> usize {
        (**self).dim_theta()
    }
    fn eval_raw(&self, x: &[T], theta: &[T]) -> Result<T> {
        (**self).eval_raw(x, theta)
    }
    fn gradient_raw(&self, x: &[T], theta: &[T]) -> Option<Result<Vec<T>>> {
        (**self).gradient_raw(x, theta)
    }
}

impl<T: Scalar, M: Model<T> + ?Sized> Model<T> for Box<M> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn dim_x(&self) -> usize {
        (**self).dim_x()
    }
    fn dim_theta(&self) -> usize {
        (**self).dim_theta()
    }
    fn eval_raw(&self, x: &[T], theta: &[T]) -> Result<T> {
        (**self).eval_raw(x, theta)
    }
    fn gradient_raw(&self, x: &[T], theta: &[T]) -> Option<Result<Vec<T>>> {
        (**self).gradient_raw(x, theta)
    }
}

type EvalFn<T> = dyn Fn(&[T], &[T]) -> T + Send + Sync;
type GradFn<T> = dyn Fn(&[T], &[T]) -> Vec<T> + Send + Sync;

/// Model assembled from closures.
pub struct FnModel<T: Scalar> {
    id: String,
    dim_x: usize,
    dim_theta: usize,
    eval: Box<EvalFn<T>>,
    gradient: Option<Box<GradFn<T>>>,
}

impl<T: Scalar> FnModel<T> {
    pub fn new(
        id: impl Into<String>,
        dim_x: usize,
        dim_theta: usize,
        eval: impl Fn(&[T], &[T]) -> T + Send + Sync + 'static,
    ) -> Self {
        FnModel {
            id: id.into(),
            dim_x,
            dim_theta,
            eval: Box::new(eval),
            gradient: None,
        }
    }

    pub fn with_gradient(
        mut self,
        gradient: impl Fn(&[T], &[T]) -> Vec<T> + Send + Sync + 'static,
    ) -> Self {
        self.gradient = Some(Box::new(gradient));
        self
    }
}

impl<T: Scalar> fmt::Debug for FnModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnModel")
            .field("id", &self.id)
            .field("dim_x", &self.dim_x)
            .field("dim_theta", &self.dim_theta)
            .field("analytic_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl<T: Scalar> Model<T> for FnModel<T> {
    fn id(&self) -> &str {
        &self.id
    }
    fn dim_x(&self) -> usize {
        self.dim_x
    }
    fn dim_theta(&self) -> usize {
        self.dim_theta
    }
    fn eval_raw(&self, x: &[T], theta: &[T]) -> Result<T> {
        Ok((self.eval)(x, theta))
    }
    fn gradient_raw(&self, x: &[T], theta: &[T]) -> Option<Result<Vec<T>>> {
        self.gradient.as_ref().map(|g| Ok(g(x, theta)))
    }
}

/// Evaluates `f(x, θ)` after checking both dimensions.
pub fn evaluate<T: Scalar, M: Model<T> + ?Sized>(model: &M, x: &[T], theta: &[T]) -> Result<T> {
    check_len("input point", model.dim_x(), x.len())?;
    check_len("parameter vector", model.dim_theta(), theta.len())?;
    let v = model.eval_raw(x, theta)?;
    if !v.is_finite_value() {
        return Err(Error::NonFinite(format!(
            "model `{}` evaluated to {v}",
            model.id()
        )));
    }
    Ok(v)
}

/// Central-difference parameter gradient with step `√ε·(1+|θ_j|)`.
pub fn finite_difference_gradient<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    x: &[T],
    theta: &[T],
) -> Result<Vec<T>> {
    let root_eps = T::machine_epsilon().cbrt();
    let mut probe = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for j in 0..theta.len() {
        let h = root_eps * (T::one() + theta[j].abs());
        probe[j] = theta[j] + h;
        let up = evaluate(model, x, &probe)?;
        probe[j] = theta[j] - h;
        let down = evaluate(model, x, &probe)?;
        probe[j] = theta[j];
        grad.push((up - down) / (h + h));
    }
    Ok(grad)
}

/// Parameter gradient, analytic when the model has one and central
/// differences otherwise.
pub fn parameter_gradient<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    x: &[T],
    theta: &[T],
) -> Result<Vec<T>> {
    check_len("input point", model.dim_x(), x.len())?;
    check_len("parameter vector", model.dim_theta(), theta.len())?;
    let grad = match model.gradient_raw(x, theta) {
        Some(g) => g?,
        None => finite_difference_gradient(model, x, theta)?,
    };
    check_len("parameter gradient", model.dim_theta(), grad.len())?;
    if grad.iter().any(|g| !g.is_finite_value()) {
        return Err(Error::NonFinite(format!(
            "gradient of model `{}` is not finite",
            model.id()
        )));
    }
    Ok(grad)
}

/// Ordered list of input points at which observations are collected.
#[derive(Debug, Clone, PartialEq)]
pub struct Design<T> {
    label: String,
    dim_x: usize,
    points: Vec<Vec<T>>,
}

impl<T: Scalar> Design<T> {
    pub fn new(label: impl Into<String>, points: Vec<Vec<T>>) -> Result<Self> {
        let label = label.into();
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidArgument(format!("design `{label}` has no points")))?;
        let dim_x = first.len();
        if dim_x == 0 {
            return Err(Error::InvalidArgument(format!(
                "design `{label}` has zero-dimensional points"
            )));
        }
        for p in &points {
            check_len("design point", dim_x, p.len())?;
            if p.iter().any(|v| !v.is_finite_value()) {
                return Err(Error::NonFinite(format!("design `{label}` coordinate")));
            }
        }
        Ok(Design {
            label,
            dim_x,
            points,
        })
    }

    /// One-dimensional design from a list of scalars.
    pub fn from_scalars(label: impl Into<String>, xs: &[T]) -> Result<Self> {
        Self::new(label, xs.iter().map(|&v| vec![v]).collect())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i]
    }

    /// Concatenates `replicates` copies of the design.
    pub fn replicate(&self, replicates: usize) -> Result<Self> {
        if replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be >= 1".into()));
        }
        let mut points = Vec::with_capacity(self.n() * replicates);
        for _ in 0..replicates {
            points.extend(self.points.iter().cloned());
        }
        Design::new(format!("{}x{}", self.label, replicates), points)
    }
}

/// Observed targets paired with the design they were measured at.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet<T> {
    values: Vec<T>,
    design: Arc<Design<T>>,
}

impl<T: Scalar> ObservationSet<T> {
    pub fn new(design: Arc<Design<T>>, values: Vec<T>) -> Result<Self> {
        check_len("observation values", design.n(), values.len())?;
        if values.iter().any(|v| !v.is_finite_value()) {
            return Err(Error::NonFinite("observation value".into()));
        }
        Ok(ObservationSet { values, design })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn design(&self) -> &Arc<Design<T>> {
        &self.design
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }
}

/// I.i.d. zero-mean Gaussian observation noise with known standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel<T> {
    sigma: T,
}

impl<T: Scalar> NoiseModel<T> {
    pub fn new(sigma: T) -> Result<Self> {
        if !(sigma > T::zero()) || !sigma.is_finite_value() {
            return Err(Error::InvalidArgument(format!(
                "noise sigma must be positive and finite, got {sigma}"
            )));
        }
        Ok(NoiseModel { sigma })
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn variance(&self) -> T {
        self.sigma * self.sigma
    }
}

/// Result of a least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterEstimate<T> {
    pub theta: Vec<T>,
    pub sse: T,
    pub converged: bool,
    pub iterations: usize,
    /// Scaled gradient norm used by the convergence test, see [`crate::lsq`].
    pub gradient_norm: T,
}

/// Which estimator produced an [`UncertaintyReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "MC")]
    MonteCarlo,
    #[serde(rename = "LIN")]
    Linearization,
    #[serde(rename = "SP")]
    SigmaPoint,
    #[serde(rename = "MS")]
    McNameeStenger,
    #[serde(rename = "LD")]
    LuDarmofal,
    #[serde(rename = "EXACT")]
    Exact,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::MonteCarlo => "MC",
            Method::Linearization => "LIN",
            Method::SigmaPoint => "SP",
            Method::McNameeStenger => "MS",
            Method::LuDarmofal => "LD",
            Method::Exact => "EXACT",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MC" => Ok(Method::MonteCarlo),
            "LIN" => Ok(Method::Linearization),
            "SP" => Ok(Method::SigmaPoint),
            "MS" => Ok(Method::McNameeStenger),
            "LD" => Ok(Method::LuDarmofal),
            "EXACT" => Ok(Method::Exact),
            _ => Err(Error::UnknownName(s.to_string())),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Method-specific parameters attached to a report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_mc: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cubature_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excluded_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_bar: Option<Vec<f64>>,
}

/// Expected prediction and prediction uncertainty at a list of input points.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyReport<T> {
    pub method: Method,
    pub eval_points: Vec<Vec<T>>,
    pub mean: Vec<T>,
    pub variance: Vec<T>,
    /// Set when any variance is negative (possible with negative cubature weights).
    pub negative_variance: bool,
    pub metadata: ReportMetadata,
}

impl<T: Scalar> UncertaintyReport<T> {
    pub(crate) fn new(
        method: Method,
        eval_points: Vec<Vec<T>>,
        mean: Vec<T>,
        variance: Vec<T>,
        metadata: ReportMetadata,
    ) -> Self {
        debug_assert_eq!(mean.len(), eval_points.len());
        debug_assert_eq!(variance.len(), eval_points.len());
        let negative_variance = variance.iter().any(|v| *v < T::zero());
        UncertaintyReport {
            method,
            eval_points,
            mean,
            variance,
            negative_variance,
            metadata,
        }
    }

    pub fn len(&self) -> usize {
        self.eval_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eval_points.is_empty()
    }
}

/// Stacks the model predictions at every design point.
pub fn stack_predictions<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    design: &Design<T>,
    theta: &[T],
) -> Result<Vec<T>> {
    check_len("design dimension", model.dim_x(), design.dim_x())?;
    design
        .points()
        .iter()
        .map(|x| evaluate(model, x, theta))
        .collect()
}

/// Returns `obs + z` on the same design.
pub fn perturb_observations<T: Scalar>(
    obs: &ObservationSet<T>,
    z: &[T],
) -> Result<ObservationSet<T>> {
    check_len("perturbation", obs.n(), z.len())?;
    let values = obs
        .values()
        .iter()
        .zip(z)
        .map(|(&y, &dz)| y + dz)
        .collect();
    ObservationSet::new(Arc::clone(obs.design()), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> FnModel<f64> {
        FnModel::new("line", 1, 1, |x: &[f64], t: &[f64]| t[0] * x[0])
            .with_gradient(|x: &[f64], _t: &[f64]| vec![x[0]])
    }

    #[test]
    fn evaluate_rejects_wrong_dimensions() {
        let m = line();
        assert!(matches!(
            evaluate(&m, &[1.0, 2.0], &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            evaluate(&m, &[1.0], &[]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert_eq!(evaluate(&m, &[3.0], &[2.0]).unwrap(), 6.0);
    }

    #[test]
    fn non_finite_outputs_are_errors() {
        let m = FnModel::new("bad", 1, 1, |_x: &[f64], _t: &[f64]| f64::NAN);
        assert!(matches!(
            evaluate(&m, &[0.0], &[0.0]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn design_validation() {
        assert!(Design::<f64>::new("empty", vec![]).is_err());
        assert!(Design::new("ragged", vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(Design::new("nan", vec![vec![f64::NAN]]).is_err());
        let d = Design::from_scalars("d", &[-1.0, 1.0]).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.replicate(3).unwrap().n(), 6);
        assert!(d.replicate(0).is_err());
    }

    #[test]
    fn noise_must_be_positive() {
        assert!(NoiseModel::new(0.0).is_err());
        assert!(NoiseModel::new(-1.0).is_err());
        assert!(NoiseModel::new(f64::INFINITY).is_err());
        assert_eq!(NoiseModel::new(0.1).unwrap().sigma(), 0.1);
    }

    #[test]
    fn perturbation_examples() {
        let d = Arc::new(Design::from_scalars("d", &[0.0, 1.0]).unwrap());
        let obs = ObservationSet::new(d, vec![1.0, 2.0]).unwrap();
        assert_eq!(perturb_observations(&obs, &[0.0, 0.0]).unwrap(), obs);
        let p = perturb_observations(&obs, &[0.5, -0.5]).unwrap();
        assert_eq!(p.values(), &[1.5, 1.5]);
        let back = perturb_observations(&p, &[-0.5, 0.5]).unwrap();
        assert_eq!(back.values(), obs.values());
        assert!(perturb_observations(&obs, &[1.0]).is_err());
    }

    #[test]
    fn finite_difference_fallback_matches_analytic() {
        let analytic = line();
        let numeric = FnModel::new("line-fd", 1, 1, |x: &[f64], t: &[f64]| t[0] * x[0]);
        let a = parameter_gradient(&analytic, &[2.5], &[0.3]).unwrap();
        let n = parameter_gradient(&numeric, &[2.5], &[0.3]).unwrap();
        assert!((a[0] - n[0]).abs() < 1e-8);
    }

    #[test]
    fn method_tags_round_trip() {
        for m in [
            Method::MonteCarlo,
            Method::Linearization,
            Method::SigmaPoint,
            Method::McNameeStenger,
            Method::LuDarmofal,
            Method::Exact,
        ] {
            assert_eq!(Method::parse(m.tag()).unwrap(), m);
        }
        assert!(Method::parse("nope").is_err());
    }
}
