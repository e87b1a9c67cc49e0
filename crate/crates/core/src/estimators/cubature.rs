use rayon::prelude::*;

use super::rules::CubatureRule;
use super::SolverSettings;
use crate::domain::{evaluate, stack_predictions, Design, Model, ObservationSet, ReportMetadata, UncertaintyReport};
use crate::error::{check_len, Error, Result};
use crate::lsq::{fit, fit_values};
use crate::scalar::Scalar;

/// Inner fits `θ̂(ȳ + z⁽ⁱ⁾)` for every rule point, with `ȳ = f̃(x̃, θ̄)`.
pub fn cubature_parameter_samples<T: Scalar, M: Model<T> + ?Sized>(
    rule: &CubatureRule<T>,
    model: &M,
    design: &Design<T>,
    theta_bar: &[T],
    solver: &SolverSettings<T>,
) -> Result<Vec<Vec<T>>> {
    check_len("cubature rule dimension", design.n(), rule.dim())?;
    let y_bar = stack_predictions(model, design, theta_bar)?;
    rule.points()
        .par_iter()
        .enumerate()
        .map(|(index, z)| {
            let y: Vec<T> = y_bar.iter().zip(z).map(|(a, b)| *a + *b).collect();
            match fit_values(model, design, &y, theta_bar, &solver.inner) {
                Ok(est) if est.converged => Ok(est.theta),
                Ok(est) => Err(Error::CubaturePointFailed {
                    index,
                    reason: format!(
                        "no convergence after {} iterations (scaled gradient {})",
                        est.iterations, est.gradient_norm
                    ),
                }),
                Err(e) => Err(Error::CubaturePointFailed { index, reason: e.to_string() }),
            }
        })
        .collect()
}

/// Rule estimates of mean and variance of the prediction, at a given `θ̄`.
pub fn cubature_at<T: Scalar, M: Model<T> + ?Sized>(
    rule: &CubatureRule<T>,
    model: &M,
    design: &Design<T>,
    theta_bar: &[T],
    eval_points: &[Vec<T>],
    solver: &SolverSettings<T>,
) -> Result<UncertaintyReport<T>> {
    let thetas = cubature_parameter_samples(rule, model, design, theta_bar, solver)?;
    let weights = rule.weights();
    let moments: Result<Vec<(T, T)>> = eval_points
        .par_iter()
        .map(|x| {
            let base = evaluate(model, x, theta_bar)?;
            let g: Vec<T> = thetas
                .iter()
                .map(|t| evaluate(model, x, t).map(|v| v - base))
                .collect::<Result<_>>()?;
            let mu = g.iter().zip(weights).fold(T::zero(), |a, (gi, w)| a + *w * *gi);
            let var = g
                .iter()
                .zip(weights)
                .fold(T::zero(), |a, (gi, w)| a + *w * (*gi - mu) * (*gi - mu));
            Ok((base + mu, var))
        })
        .collect();
    let (mean, variance) = moments?.into_iter().unzip();
    let metadata = ReportMetadata {
        cubature_size: Some(rule.len()),
        theta_bar: Some(theta_bar.iter().map(|v| v.to_f64_lossy()).collect()),
        ..Default::default()
    };
    Ok(UncertaintyReport::new(rule.method(), eval_points.to_vec(), mean, variance, metadata))
}

/// Fits `θ̄` to `obs`, then evaluates the cubature rule around `f̃(x̃, θ̄)`.
pub fn cubature_uncertainty<T: Scalar, M: Model<T> + ?Sized>(
    rule: &CubatureRule<T>,
    model: &M,
    obs: &ObservationSet<T>,
    eval_points: &[Vec<T>],
    solver: &SolverSettings<T>,
) -> Result<UncertaintyReport<T>> {
    let theta_bar = fit(model, obs, &solver.init, &solver.outer)?;
    if !theta_bar.converged {
        return Err(Error::FitFailed("fit of the observations did not converge".into()));
    }
    cubature_at(rule, model, obs.design(), &theta_bar.theta, eval_points, solver)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{FnModel, Method, NoiseModel};
    use crate::estimators::{linearization_at, lu_darmofal_rule, mcnamee_stenger_rule, sigma_point_rule};
    use crate::models::ExponentialModel;
    use std::sync::Arc;

    #[test]
    fn degenerate_rule_gives_zero_variance() {
        let d = Arc::new(Design::from_scalars("d", &[-1.0, 0.0, 1.0]).unwrap());
        let theta = [0.2, 1.2];
        let obs = ObservationSet::new(d.clone(), stack_predictions(&ExponentialModel, &d, &theta).unwrap()).unwrap();
        let rule = CubatureRule::new(Method::LuDarmofal, "zero", 5, vec![vec![0.0; 3]; 5], vec![0.2; 5]).unwrap();
        let pts = vec![vec![0.5], vec![-0.3]];
        let r = cubature_uncertainty(&rule, &ExponentialModel, &obs, &pts, &SolverSettings::new(theta.to_vec())).unwrap();
        for (x, (m, v)) in pts.iter().zip(r.mean.iter().zip(&r.variance)) {
            assert_eq!(*v, 0.0);
            assert!((m - evaluate::<f64, _>(&ExponentialModel, x, &theta).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_model_matches_linearization() {
        let m = FnModel::new("line", 1, 1, |x: &[f64], t: &[f64]| t[0] * x[0]).with_gradient(|x, _| vec![x[0]]);
        let d = Arc::new(Design::from_scalars("d", &[1.0, 2.0, -0.5]).unwrap());
        let obs = ObservationSet::new(d.clone(), vec![1.0, 2.2, -0.4]).unwrap();
        let noise = NoiseModel::new(0.3).unwrap();
        let s = SolverSettings::new(vec![0.0]);
        let pts = vec![vec![1.5], vec![-2.0]];
        let ld = cubature_uncertainty(&lu_darmofal_rule(3, 0.3).unwrap(), &m, &obs, &pts, &s).unwrap();
        let ms = cubature_uncertainty(&mcnamee_stenger_rule(3, 0.3).unwrap(), &m, &obs, &pts, &s).unwrap();
        let theta_bar = ld.metadata.theta_bar.clone().unwrap();
        let lin = linearization_at(&m, &d, &theta_bar, &noise, &pts).unwrap();
        for i in 0..2 {
            assert!((ld.variance[i] - lin.variance[i]).abs() < 1e-13);
            assert!((ms.variance[i] - lin.variance[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn rule_dimension_must_match_design() {
        let d = Arc::new(Design::from_scalars("d", &[-1.0, 1.0]).unwrap());
        let obs = ObservationSet::new(d, vec![0.1, 0.3]).unwrap();
        let rule = sigma_point_rule(3, 0.1, 0.0).unwrap();
        assert!(cubature_uncertainty(&rule, &ExponentialModel, &obs, &[vec![0.0]], &SolverSettings::new(vec![0.2, 1.0])).is_err());
    }

    #[test]
    fn failing_point_is_named() {
        let d = Arc::new(Design::from_scalars("d", &[1.0, 1.0]).unwrap());
        let obs = ObservationSet::new(d, vec![1.0, 1.0]).unwrap();
        // f = exp(θx) cannot reach negative observations; the solver hits the exponent guard
        let m = FnModel::new("e", 1, 1, |x: &[f64], t: &[f64]| (t[0] * x[0]).exp());
        let rule = sigma_point_rule(2, 1e3, 1.0).unwrap();
        let s = SolverSettings { inner: crate::lsq::SolverConfig { max_iterations: 3, ..crate::lsq::SolverConfig::inner() }, ..SolverSettings::new(vec![0.0]) };
        let err = cubature_uncertainty(&rule, &m, &obs, &[vec![0.0]], &s).unwrap_err();
        assert!(matches!(err, Error::CubaturePointFailed { .. }), "{err:?}");
    }
}
