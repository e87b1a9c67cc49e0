use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sobol::{NormalStream, SequenceKind};
use super::SolverSettings;
use crate::domain::{evaluate, Method, Model, NoiseModel, ObservationSet, ReportMetadata, UncertaintyReport};
use crate::error::{Error, Result};
use crate::lsq::{fit, fit_values};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub sequence: SequenceKind,
}

impl McConfig {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        McConfig { n_samples, seed, sequence: SequenceKind::Sobol }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(Error::InvalidArgument(format!(
                "Monte Carlo needs at least 2 samples, got {}",
                self.n_samples
            )));
        }
        Ok(())
    }
}

/// Parameter estimates of the perturbed observation sets, in sample order.
#[derive(Debug, Clone, PartialEq)]
pub struct McParameterSamples<T> {
    /// Fit of the unperturbed center observations; warm start of every sample.
    pub center_estimate: Vec<T>,
    /// `(sample index, θ̂)` for every accepted sample, ascending by index.
    pub estimates: Vec<(usize, Vec<T>)>,
    /// Indices of samples whose fit failed or did not converge.
    pub excluded: Vec<usize>,
    pub n_samples: usize,
}

impl<T: Scalar> McParameterSamples<T> {
    pub fn thetas(&self) -> Vec<&[T]> {
        self.estimates.iter().map(|(_, t)| t.as_slice()).collect()
    }

    /// Accepted estimates among the first `n` samples of the stream.
    pub fn prefix(&self, n: usize) -> Vec<&[T]> {
        self.estimates
            .iter()
            .take_while(|(i, _)| *i < n)
            .map(|(_, t)| t.as_slice())
            .collect()
    }
}

/// Draws `cfg.n_samples` observation sets `center + σ·z⁽ⁱ⁾` and fits each one.
pub fn mc_parameter_samples<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    center_obs: &ObservationSet<T>,
    noise: &NoiseModel<T>,
    cfg: &McConfig,
    solver: &SolverSettings<T>,
) -> Result<McParameterSamples<T>> {
    cfg.validate()?;
    let center = fit(model, center_obs, &solver.init, &solver.outer)?;
    let n = center_obs.n();
    let stream = NormalStream::new(cfg.sequence, n, cfg.seed)?;
    let design = center_obs.design();
    let sigma = noise.sigma();

    let fits: Vec<Option<Vec<T>>> = (0..cfg.n_samples)
        .into_par_iter()
        .map(|i| {
            let z = stream.row(i as u64);
            let y: Vec<T> = center_obs
                .values()
                .iter()
                .zip(z)
                .map(|(c, zi)| *c + sigma * T::lit(zi))
                .collect();
            match fit_values(model, design, &y, &center.theta, &solver.inner) {
                Ok(est) if est.converged => Some(est.theta),
                _ => None,
            }
        })
        .collect();

    let mut estimates = Vec::with_capacity(fits.len());
    let mut excluded = Vec::new();
    for (i, f) in fits.into_iter().enumerate() {
        match f {
            Some(theta) => estimates.push((i, theta)),
            None => excluded.push(i),
        }
    }
    if !excluded.is_empty() && excluded.len() * 1000 >= cfg.n_samples {
        return Err(Error::ExclusionBudgetExceeded {
            excluded: excluded.len(),
            total: cfg.n_samples,
        });
    }
    Ok(McParameterSamples {
        center_estimate: center.theta,
        estimates,
        excluded,
        n_samples: cfg.n_samples,
    })
}

/// Mean and population variance of `f(x, θ̂⁽ⁱ⁾)` over the given estimates,
/// accumulated in sample order for each eval point.
pub fn mc_moments<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    thetas: &[&[T]],
    eval_points: &[Vec<T>],
) -> Result<(Vec<T>, Vec<T>)> {
    let count = thetas.len();
    if count == 0 {
        return Err(Error::InvalidArgument("no parameter samples".into()));
    }
    let nf = T::from_count(count);
    let moments: Result<Vec<(T, T)>> = eval_points
        .par_iter()
        .map(|x| {
            let mut sum = T::zero();
            let mut values = Vec::with_capacity(count);
            for theta in thetas {
                let g = evaluate(model, x, theta)?;
                sum += g;
                values.push(g);
            }
            let mean = sum / nf;
            let var = values.iter().fold(T::zero(), |a, g| a + (*g - mean) * (*g - mean)) / nf;
            Ok((mean, var))
        })
        .collect();
    Ok(moments?.into_iter().unzip())
}

/// Monte Carlo estimate of the expected prediction and prediction uncertainty.
pub fn mc_uncertainty<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    center_obs: &ObservationSet<T>,
    noise: &NoiseModel<T>,
    eval_points: &[Vec<T>],
    cfg: &McConfig,
    solver: &SolverSettings<T>,
) -> Result<UncertaintyReport<T>> {
    let samples = mc_parameter_samples(model, center_obs, noise, cfg, solver)?;
    let (mean, variance) = mc_moments(model, &samples.thetas(), eval_points)?;
    let metadata = ReportMetadata {
        n_mc: Some(cfg.n_samples),
        seed: Some(cfg.seed),
        excluded_samples: Some(samples.excluded.len()),
        theta_bar: Some(samples.center_estimate.iter().map(|v| v.to_f64_lossy()).collect()),
        ..Default::default()
    };
    Ok(UncertaintyReport::new(Method::MonteCarlo, eval_points.to_vec(), mean, variance, metadata))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{stack_predictions, Design, FnModel};
    use crate::models::QuadraticModel;
    use std::sync::Arc;

    fn quadratic_setup(sigma: f64) -> (QuadraticModel<f64>, ObservationSet<f64>, NoiseModel<f64>) {
        let m = QuadraticModel::unit(1).unwrap();
        let d = Arc::new(Design::from_scalars("d", &[-1.0, -1.0, 1.0, 1.0]).unwrap());
        let y = stack_predictions(&m, &d, &[2.74, -4.6]).unwrap();
        (m, ObservationSet::new(d, y).unwrap(), NoiseModel::new(sigma).unwrap())
    }

    #[test]
    fn vanishing_noise_gives_vanishing_variance() {
        let (m, obs, noise) = quadratic_setup(1e-12);
        let pts = vec![vec![-1.0], vec![0.0], vec![0.4]];
        let r = mc_uncertainty(&m, &obs, &noise, &pts, &McConfig::new(64, 1), &SolverSettings::new(vec![2.74, -4.6])).unwrap();
        assert!(r.variance.iter().all(|v| *v <= 1e-20));
    }

    #[test]
    fn linear_model_variance() {
        // f = θx on design (1, 1): θ̂ = (y1 + y2)/2 has variance σ²/2
        let m = FnModel::new("line", 1, 1, |x: &[f64], t: &[f64]| t[0] * x[0]).with_gradient(|x, _| vec![x[0]]);
        let d = Arc::new(Design::from_scalars("d", &[1.0, 1.0]).unwrap());
        let obs = ObservationSet::new(d, vec![2.0, 2.0]).unwrap();
        let noise = NoiseModel::new(1.0).unwrap();
        let r = mc_uncertainty(&m, &obs, &noise, &[vec![2.0]], &McConfig::new(1 << 14, 9), &SolverSettings::new(vec![0.0])).unwrap();
        assert!((r.variance[0] - 2.0).abs() < 0.02, "{}", r.variance[0]);
        assert!((r.mean[0] - 4.0).abs() < 0.01);
    }

    #[test]
    fn samples_are_prefix_consistent_and_deterministic() {
        let (m, obs, noise) = quadratic_setup(0.1);
        let s = SolverSettings::new(vec![2.74, -4.6]);
        let long = mc_parameter_samples(&m, &obs, &noise, &McConfig::new(400, 3), &s).unwrap();
        let short = mc_parameter_samples(&m, &obs, &noise, &McConfig::new(100, 3), &s).unwrap();
        assert_eq!(long.prefix(100), short.thetas());
        let again = mc_parameter_samples(&m, &obs, &noise, &McConfig::new(400, 3), &s).unwrap();
        assert_eq!(long, again);
    }

    #[test]
    fn config_validation() {
        let (m, obs, noise) = quadratic_setup(0.1);
        let s = SolverSettings::new(vec![2.74, -4.6]);
        assert!(mc_uncertainty(&m, &obs, &noise, &[vec![0.0]], &McConfig::new(1, 0), &s).is_err());
    }
}
