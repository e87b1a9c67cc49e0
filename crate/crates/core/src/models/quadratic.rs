//! Separable quadratic model
//! `f(x, θ) = θ₀ + Σ_k α_k θ_k x_k + Σ_k β_k (θ_k²/2) x_k²`,
//! quadratic in both the inputs and the parameters.

use crate::domain::Model;
use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel<T> {
    alpha: Vec<T>,
    beta: Vec<T>,
}

impl<T: Scalar> QuadraticModel<T> {
    /// Every `alpha_k` must be non-zero.
    pub fn new(alpha: Vec<T>, beta: Vec<T>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::InvalidArgument(
                "quadratic model needs at least one input dimension".into(),
            ));
        }
        check_len("quadratic beta", alpha.len(), beta.len())?;
        if let Some(k) = alpha.iter().position(|a| *a == T::zero()) {
            return Err(Error::InvalidArgument(format!("alpha[{k}] must be non-zero")));
        }
        if alpha.iter().chain(&beta).any(|v| !v.is_finite_value()) {
            return Err(Error::NonFinite("quadratic coefficient".into()));
        }
        Ok(QuadraticModel { alpha, beta })
    }

    /// `α = β = (1, …, 1)`.
    pub fn unit(dim_x: usize) -> Result<Self> {
        Self::new(vec![T::one(); dim_x], vec![T::one(); dim_x])
    }

    pub fn alpha(&self) -> &[T] {
        &self.alpha
    }

    pub fn beta(&self) -> &[T] {
        &self.beta
    }

    /// Checked evaluation.
    pub fn quadratic_eval(&self, x: &[T], theta: &[T]) -> Result<T> {
        check_len("input point", self.alpha.len(), x.len())?;
        check_len("parameter vector", self.alpha.len() + 1, theta.len())?;
        Ok(self.value(x, theta))
    }

    fn value(&self, x: &[T], theta: &[T]) -> T {
        let half = T::lit(0.5);
        let mut f = theta[0];
        for k in 0..self.alpha.len() {
            let t = theta[k + 1];
            f += self.alpha[k] * t * x[k] + self.beta[k] * half * t * t * x[k] * x[k];
        }
        f
    }
}

impl<T: Scalar> Model<T> for QuadraticModel<T> {
    fn id(&self) -> &str {
        "quadratic"
    }

    fn dim_x(&self) -> usize {
        self.alpha.len()
    }

    fn dim_theta(&self) -> usize {
        self.alpha.len() + 1
    }

    fn eval_raw(&self, x: &[T], theta: &[T]) -> Result<T> {
        Ok(self.value(x, theta))
    }

    fn gradient_raw(&self, x: &[T], theta: &[T]) -> Option<Result<Vec<T>>> {
        let mut g = Vec::with_capacity(theta.len());
        g.push(T::one());
        for k in 0..self.alpha.len() {
            g.push(self.alpha[k] * x[k] + self.beta[k] * theta[k + 1] * x[k] * x[k]);
        }
        Some(Ok(g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{evaluate, parameter_gradient};

    #[test]
    fn evaluation_examples() {
        let m1 = QuadraticModel::<f64>::unit(1).unwrap();
        assert_eq!(evaluate(&m1, &[1.0], &[0.0, 0.0]).unwrap(), 0.0);

        let m2 = QuadraticModel::<f64>::unit(2).unwrap();
        assert_eq!(
            m2.quadratic_eval(&[1.0, -1.0], &[1.0, 2.0, 3.0]).unwrap(),
            6.5
        );
        assert_eq!(
            m2.quadratic_eval(&[0.0, 0.0], &[27.39, -46.04, -91.81]).unwrap(),
            27.39
        );
        assert_eq!(
            m2.quadratic_eval(&[1.0, 1.0], &[1.0, 1.0, 1.0]).unwrap(),
            4.0
        );
        assert_eq!(
            m2.quadratic_eval(&[0.7, -0.2], &[0.0, 0.0, 0.0]).unwrap(),
            0.0
        );
    }

    #[test]
    fn rejects_zero_alpha_and_bad_dims() {
        assert!(QuadraticModel::new(vec![1.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(QuadraticModel::new(vec![1.0], vec![1.0, 1.0]).is_err());
        let m = QuadraticModel::<f64>::unit(2).unwrap();
        assert!(m.quadratic_eval(&[1.0], &[1.0, 1.0, 1.0]).is_err());
        assert!(m.quadratic_eval(&[1.0, 1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn gradient_example() {
        let m = QuadraticModel::<f64>::unit(1).unwrap();
        assert_eq!(parameter_gradient(&m, &[1.0], &[0.0, 2.0]).unwrap(), vec![1.0, 3.0]);
    }

    #[test]
    fn works_in_single_precision() {
        let m = QuadraticModel::<f32>::unit(2).unwrap();
        assert_eq!(m.quadratic_eval(&[1.0, -1.0], &[1.0, 2.0, 3.0]).unwrap(), 6.5f32);
    }
}
