//! Exponential growth model `f(x, θ) = θ₁·exp(θ₂·x)`.

use crate::domain::Model;
use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

/// Largest admissible exponent `θ₂·x`.
pub const MAX_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExponentialModel;

impl ExponentialModel {
    /// Box `θ₁ ∈ [−10, 10]`, `θ₂ ∈ [−5, 5]`. Observation sets with a
    /// non-positive mean at one end of a two-level design have no interior
    /// minimizer; the box turns them into well-posed fits on its boundary.
    pub fn default_bounds<T: Scalar>() -> (Vec<T>, Vec<T>) {
        (vec![T::lit(-10.0), T::lit(-5.0)], vec![T::lit(10.0), T::lit(5.0)])
    }
}

fn checked_exp<T: Scalar>(exponent: T) -> Result<T> {
    if exponent > T::lit(MAX_EXPONENT) || !exponent.is_finite_value() {
        return Err(Error::NonFinite(format!(
            "exponential growth exponent {exponent} exceeds {MAX_EXPONENT}"
        )));
    }
    Ok(exponent.exp())
}

/// Checked scalar evaluation.
pub fn exponential_eval<T: Scalar>(x: T, theta: &[T]) -> Result<T> {
    check_len("parameter vector", 2, theta.len())?;
    Ok(theta[0] * checked_exp(theta[1] * x)?)
}

impl<T: Scalar> Model<T> for ExponentialModel {
    fn id(&self) -> &str {
        "exponential"
    }

    fn dim_x(&self) -> usize {
        1
    }

    fn dim_theta(&self) -> usize {
        2
    }

    fn eval_raw(&self, x: &[T], theta: &[T]) -> Result<T> {
        exponential_eval(x[0], theta)
    }

    fn gradient_raw(&self, x: &[T], theta: &[T]) -> Option<Result<Vec<T>>> {
        Some(checked_exp(theta[1] * x[0]).map(|e| vec![e, theta[0] * x[0] * e]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{evaluate, parameter_gradient};

    #[test]
    fn evaluation_examples() {
        assert_eq!(exponential_eval(0.0, &[0.2, 1.2]).unwrap(), 0.2);
        let v = exponential_eval(1.0, &[0.2, 1.2]).unwrap();
        assert!((v - 0.2 * 1.2f64.exp()).abs() < 1e-15);
        assert!((v - 0.66402).abs() < 1e-5);
        assert_eq!(exponential_eval(3.0, &[0.0, 1.2]).unwrap(), 0.0);
        assert_eq!(
            evaluate(&ExponentialModel, &[0.0], &[0.2, 1.2]).unwrap(),
            0.2
        );
    }

    #[test]
    fn overflow_guard() {
        assert!(exponential_eval(1.0, &[1.0, 700.5]).is_err());
        assert!(exponential_eval(1.0, &[1.0, 699.0]).is_ok());
        assert!(exponential_eval(-1000.0, &[1.0, 1.0]).is_ok());
    }

    #[test]
    fn gradient_at_origin() {
        let g = parameter_gradient(&ExponentialModel, &[0.0], &[0.2, 1.2]).unwrap();
        assert_eq!(g, vec![1.0, 0.0]);
    }
}
