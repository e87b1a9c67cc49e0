//! Benchmark models: the separable quadratic model (any input dimension),
//! exponential growth, and the binary NRTL activity coefficient.

mod exponential;
mod nrtl;
mod quadratic;

pub use exponential::{exponential_eval, ExponentialModel, MAX_EXPONENT};
pub use nrtl::{nrtl_g, nrtl_gamma, nrtl_gamma1, nrtl_tau, NrtlModel, NrtlSpec};
pub use quadratic::QuadraticModel;

use crate::domain::Model;
use crate::error::Result;
use crate::scalar::Scalar;

/// Closed set of built-in models, convenient for configuration-driven runs.
#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinModel<T> {
    Quadratic(QuadraticModel<T>),
    Exponential(ExponentialModel),
    Nrtl(NrtlModel<T>),
}

impl<T: Scalar> BuiltinModel<T> {
    fn inner(&self) -> &dyn Model<T> {
        match self {
            BuiltinModel::Quadratic(m) => m,
            BuiltinModel::Exponential(m) => m,
            BuiltinModel::Nrtl(m) => m,
        }
    }

    /// Parameter box used by the solver unless configured otherwise.
    pub fn default_bounds(&self) -> Option<(Vec<T>, Vec<T>)> {
        match self {
            BuiltinModel::Exponential(_) => Some(ExponentialModel::default_bounds()),
            _ => None,
        }
    }
}

impl<T: Scalar> Model<T> for BuiltinModel<T> {
    fn id(&self) -> &str {
        self.inner().id()
    }
    fn dim_x(&self) -> usize {
        self.inner().dim_x()
    }
    fn dim_theta(&self) -> usize {
        self.inner().dim_theta()
    }
    fn eval_raw(&self, x: &[T], theta: &[T]) -> Result<T> {
        self.inner().eval_raw(x, theta)
    }
    fn gradient_raw(&self, x: &[T], theta: &[T]) -> Option<Result<Vec<T>>> {
        self.inner().gradient_raw(x, theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{evaluate, finite_difference_gradient, parameter_gradient};
    use proptest::prelude::*;

    fn assert_close_rel(a: &[f64], b: &[f64], tol: f64) -> std::result::Result<(), TestCaseError> {
        for (x, y) in a.iter().zip(b) {
            let scale = x.abs().max(y.abs()).max(1.0);
            prop_assert!((x - y).abs() <= tol * scale, "{x} vs {y}");
        }
        Ok(())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn quadratic_jacobian_consistency(
            x in prop::collection::vec(-1.0f64..1.0, 2),
            theta in prop::collection::vec(-100.0f64..100.0, 3),
        ) {
            let m = QuadraticModel::<f64>::unit(2).unwrap();
            let a = parameter_gradient(&m, &x, &theta).unwrap();
            let n = finite_difference_gradient(&m, &x, &theta).unwrap();
            assert_close_rel(&a, &n, 1e-5)?;
        }

        #[test]
        fn exponential_jacobian_consistency(
            x in -1.0f64..1.0,
            t1 in -5.0f64..5.0,
            t2 in -5.0f64..5.0,
        ) {
            let a = parameter_gradient(&ExponentialModel, &[x], &[t1, t2]).unwrap();
            let n = finite_difference_gradient(&ExponentialModel, &[x], &[t1, t2]).unwrap();
            assert_close_rel(&a, &n, 1e-5)?;
        }

        #[test]
        fn nrtl_jacobian_consistency(
            l in 0.0f64..1.0,
            t in 298.15f64..373.15,
            b12 in -400.0f64..400.0,
            b21 in -400.0f64..400.0,
        ) {
            let m = NrtlModel::<f64>::default();
            let a = parameter_gradient(&m, &[l, t], &[b12, b21]).unwrap();
            let n = finite_difference_gradient(&m, &[l, t], &[b12, b21]).unwrap();
            assert_close_rel(&a, &n, 1e-5)?;
        }

        // f(x,θ) − f_lin(x,θ) = Σ β_k (x_k²/2)(θ_k − θ̄_k)²
        #[test]
        fn quadratic_linearization_residual_is_the_quadratic_term(
            x in prop::collection::vec(-1.0f64..1.0, 2),
            theta in prop::collection::vec(-10.0f64..10.0, 3),
            bar in prop::collection::vec(-10.0f64..10.0, 3),
            beta in prop::collection::vec(-2.0f64..2.0, 2),
        ) {
            let m = QuadraticModel::new(vec![1.5, -0.7], beta.clone()).unwrap();
            let f = evaluate(&m, &x, &theta).unwrap();
            let f_bar = evaluate(&m, &x, &bar).unwrap();
            let g = parameter_gradient(&m, &x, &bar).unwrap();
            let lin = f_bar + g.iter().zip(theta.iter().zip(&bar)).map(|(gj, (t, b))| gj * (t - b)).sum::<f64>();
            let expected: f64 = (0..2).map(|k| beta[k] * x[k] * x[k] / 2.0 * (theta[k + 1] - bar[k + 1]).powi(2)).sum();
            prop_assert!((f - lin - expected).abs() <= 1e-10 * (1.0 + f.abs()));
        }

        #[test]
        fn evaluation_is_deterministic(
            x in prop::collection::vec(-1.0f64..1.0, 2),
            theta in prop::collection::vec(-100.0f64..100.0, 3),
        ) {
            let m = BuiltinModel::Quadratic(QuadraticModel::<f64>::unit(2).unwrap());
            let a = evaluate(&m, &x, &theta).unwrap();
            let b = evaluate(&m, &x, &theta).unwrap();
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn builtin_dispatch() {
        let m: BuiltinModel<f64> = BuiltinModel::Exponential(ExponentialModel);
        assert_eq!(m.id(), "exponential");
        assert_eq!(m.dim_theta(), 2);
        assert_eq!(evaluate(&m, &[0.0], &[0.2, 1.2]).unwrap(), 0.2);
        let n: BuiltinModel<f64> = BuiltinModel::Nrtl(NrtlModel::default());
        assert_eq!(n.dim_x(), 2);
    }
}
