use nalgebra::DVector;

use super::SolverSettings;
use crate::domain::{evaluate, parameter_gradient, Design, Method, Model, NoiseModel, ObservationSet, ReportMetadata, UncertaintyReport};
use crate::error::{Error, Result};
use crate::lsq::{fit, model_jacobian_matrix};
use crate::scalar::Scalar;

/// Largest accepted condition number of the information matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// `V^LIN(x) = J(x,θ̄) M⁻¹ J(x,θ̄)ᵀ` with `M = J̃ᵀJ̃/σ²`, at a given `θ̄`.
pub fn linearization_at<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    design: &Design<T>,
    theta_bar: &[T],
    noise: &NoiseModel<T>,
    eval_points: &[Vec<T>],
) -> Result<UncertaintyReport<T>> {
    let jac = model_jacobian_matrix(model, design, theta_bar)?;
    let p = jac.ncols();
    if jac.nrows() < p {
        return Err(Error::RankDeficient {
            design: design.label().to_string(),
            condition: f64::INFINITY,
        });
    }
    // J̃ = U S Vᵀ, so M⁻¹ = σ² V S⁻² Vᵀ and V^LIN(x) = σ² ‖S⁻¹ Vᵀ J(x)ᵀ‖².
    let svd = jac.svd(false, true);
    let s = &svd.singular_values;
    let s_max = s.iter().fold(T::zero(), |a, v| a.max(*v));
    let s_min = s.iter().fold(T::max_value().unwrap_or(s_max), |a, v| a.min(*v));
    let condition = if s_min > T::zero() {
        ((s_max / s_min) * (s_max / s_min)).to_f64_lossy()
    } else {
        f64::INFINITY
    };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::RankDeficient {
            design: design.label().to_string(),
            condition,
        });
    }
    let v_t = svd.v_t.expect("right singular vectors requested");
    let var = noise.variance();

    let mut mean = Vec::with_capacity(eval_points.len());
    let mut variance = Vec::with_capacity(eval_points.len());
    for x in eval_points {
        let g = DVector::from_vec(parameter_gradient(model, x, theta_bar)?);
        let proj = &v_t * g;
        let q = proj
            .iter()
            .zip(s.iter())
            .fold(T::zero(), |a, (pj, sj)| a + (*pj / *sj) * (*pj / *sj));
        mean.push(evaluate(model, x, theta_bar)?);
        variance.push(var * q);
    }
    let metadata = ReportMetadata {
        theta_bar: Some(theta_bar.iter().map(|v| v.to_f64_lossy()).collect()),
        ..Default::default()
    };
    Ok(UncertaintyReport::new(Method::Linearization, eval_points.to_vec(), mean, variance, metadata))
}

/// Fits `θ̄` to `obs` and evaluates the linearization approximation.
pub fn linearization_uncertainty<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    obs: &ObservationSet<T>,
    noise: &NoiseModel<T>,
    eval_points: &[Vec<T>],
    solver: &SolverSettings<T>,
) -> Result<UncertaintyReport<T>> {
    let theta_bar = fit(model, obs, &solver.init, &solver.outer)?;
    if !theta_bar.converged {
        return Err(Error::FitFailed("fit of the observations did not converge".into()));
    }
    linearization_at(model, obs.design(), &theta_bar.theta, noise, eval_points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::named_benchmark_design;
    use crate::domain::{stack_predictions, FnModel};
    use crate::models::QuadraticModel;
    use std::sync::Arc;

    #[test]
    fn scalar_linear_model() {
        let m = FnModel::new("line", 1, 1, |x: &[f64], t: &[f64]| t[0] * x[0]).with_gradient(|x, _| vec![x[0]]);
        let d = Arc::new(Design::from_scalars("d", &[1.0, 1.0]).unwrap());
        let obs = ObservationSet::new(d, vec![0.5, 1.5]).unwrap();
        let noise = NoiseModel::new(1.0).unwrap();
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 - 2.0]).collect();
        let r = linearization_uncertainty(&m, &obs, &noise, &pts, &SolverSettings::new(vec![0.0])).unwrap();
        for (x, v) in pts.iter().zip(&r.variance) {
            assert!((v - x[0] * x[0] / 2.0).abs() < 1e-14);
        }
        assert!((r.mean[4] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn corner_value_on_validation_design() {
        let m = QuadraticModel::unit(2).unwrap();
        let d = Arc::new(named_benchmark_design("quad2d_validation").unwrap());
        let theta = [27.39, -46.04, -91.81];
        let obs = ObservationSet::new(d.clone(), stack_predictions(&m, &d, &theta).unwrap()).unwrap();
        let noise = NoiseModel::new(0.1).unwrap();
        let r = linearization_uncertainty(&m, &obs, &noise, &[vec![1.0, 1.0]], &SolverSettings::new(theta.to_vec())).unwrap();
        assert!((r.variance[0] - 0.00375f64).abs() < 1e-12);
    }

    #[test]
    fn rank_deficiency_names_the_design() {
        let m = FnModel::new("two", 1, 2, |x: &[f64], t: &[f64]| (t[0] + t[1]) * x[0]);
        let d = Design::from_scalars("collinear", &[1.0, 2.0]).unwrap();
        let err = linearization_at(&m, &d, &[1.0, 1.0], &NoiseModel::new(1.0).unwrap(), &[vec![0.0]]).unwrap_err();
        match err {
            Error::RankDeficient { design, .. } => assert_eq!(design, "collinear"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
