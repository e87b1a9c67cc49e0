//! Nonlinear least squares: a Levenberg-Marquardt solver with deterministic multistart.
//!
//! The convergence test is scale aware. A fit is declared converged when
//!
//! ```text
//! ‖J(θ)ᵀ r(θ)‖ / (‖J(θ)‖_F · max(1, ‖y‖)) ≤ gradient_tolerance
//! ```
//!
//! and this scaled quantity is what [`ParameterEstimate::gradient_norm`] reports.
//! With bounds, components held at an active bound are dropped from the
//! gradient (projected gradient) and from the step. Once the damped iteration
//! stalls, Newton steps on the full Hessian of `S` refine the minimizer along
//! directions whose decrease of `S` is below its rounding level.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{evaluate, parameter_gradient, Design, Model, ObservationSet, ParameterEstimate};
use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

/// How the starting points of a multistart fit are generated. Start 0 is
/// always the given initial vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Only the given vector; additional starts are ignored.
    Given,
    /// Uniform draws from a box of half-width `max(0.5·|θ_j|, 1)` around the given vector.
    PerturbedGiven,
    /// Uniform draws from `bounds`, or from the perturbation box when no bounds are set.
    RandomBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    pub max_iterations: usize,
    pub gradient_tolerance: T,
    pub step_tolerance: T,
    pub multistart_count: usize,
    pub init_strategy: InitStrategy,
    /// Initial damping relative to the largest diagonal entry of `JᵀJ`.
    pub damping_init: T,
    /// Optional per-parameter box `(lower, upper)`; iterates are projected onto it.
    pub bounds: Option<(Vec<T>, Vec<T>)>,
    pub seed: u64,
}

impl<T: Scalar> SolverConfig<T> {
    /// Configuration for a single warm-started inner fit.
    pub fn inner() -> Self {
        let eps = T::machine_epsilon();
        SolverConfig {
            max_iterations: 2000,
            gradient_tolerance: T::lit(1e-12).max(T::lit(64.0) * eps),
            step_tolerance: T::lit(1e-14).max(T::lit(4.0) * eps),
            multistart_count: 1,
            init_strategy: InitStrategy::Given,
            damping_init: T::lit(1e-3),
            bounds: None,
            seed: 0,
        }
    }

    /// Configuration for the outer fit of the available observations.
    pub fn outer() -> Self {
        SolverConfig {
            multistart_count: 16,
            init_strategy: InitStrategy::RandomBox,
            ..Self::inner()
        }
    }

    pub fn validate(&self, dim_theta: usize) -> Result<()> {
        if !(self.gradient_tolerance > T::zero()) || !(self.step_tolerance > T::zero()) {
            return Err(Error::InvalidArgument("solver tolerances must be positive".into()));
        }
        if self.multistart_count == 0 || self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "multistart_count and max_iterations must be >= 1".into(),
            ));
        }
        if !(self.damping_init > T::zero()) {
            return Err(Error::InvalidArgument("damping_init must be positive".into()));
        }
        if let Some((lo, hi)) = &self.bounds {
            check_len("lower bounds", dim_theta, lo.len())?;
            check_len("upper bounds", dim_theta, hi.len())?;
            if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                return Err(Error::InvalidArgument("bounds must satisfy lower <= upper".into()));
            }
        }
        Ok(())
    }
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self::outer()
    }
}

/// Stacked Jacobian: row `i` is the parameter gradient of `f` at `(x_i, θ)`.
pub fn model_jacobian_matrix<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    design: &Design<T>,
    theta: &[T],
) -> Result<DMatrix<T>> {
    check_len("design dimension", model.dim_x(), design.dim_x())?;
    let p = model.dim_theta();
    let mut jac = DMatrix::zeros(design.n(), p);
    for (i, x) in design.points().iter().enumerate() {
        let g = parameter_gradient(model, x, theta)?;
        for (j, v) in g.into_iter().enumerate() {
            jac[(i, j)] = v;
        }
    }
    Ok(jac)
}

/// Fits `θ` to `obs` by minimizing `S(θ) = Σ (y_i − f(x_i, θ))²`.
pub fn fit<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    obs: &ObservationSet<T>,
    init: &[T],
    config: &SolverConfig<T>,
) -> Result<ParameterEstimate<T>> {
    fit_values(model, obs.design(), obs.values(), init, config)
}

/// Same as [`fit`] with the observations given as a plain slice.
pub fn fit_values<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    design: &Design<T>,
    y: &[T],
    init: &[T],
    config: &SolverConfig<T>,
) -> Result<ParameterEstimate<T>> {
    check_len("design dimension", model.dim_x(), design.dim_x())?;
    check_len("observations", design.n(), y.len())?;
    check_len("initial parameters", model.dim_theta(), init.len())?;
    config.validate(init.len())?;
    if init.iter().any(|v| !v.is_finite_value()) {
        return Err(Error::NonFinite("initial parameter vector".into()));
    }

    let starts = starting_points(init, config);
    let run = |s: &Vec<T>| levenberg_marquardt(model, design, y, s, config);
    let results: Vec<Result<ParameterEstimate<T>>> = if starts.len() > 1 {
        starts.par_iter().map(run).collect()
    } else {
        starts.iter().map(run).collect()
    };

    let mut best: Option<ParameterEstimate<T>> = None;
    let mut last_err = None;
    for r in results {
        match r {
            Ok(est) => {
                if best.as_ref().is_none_or(|b| est.sse < b.sse) {
                    best = Some(est);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| {
        Error::FitFailed(last_err.map_or_else(|| "no start succeeded".into(), |e| e.to_string()))
    })
}

fn starting_points<T: Scalar>(init: &[T], config: &SolverConfig<T>) -> Vec<Vec<T>> {
    let mut starts = vec![project(init.to_vec(), config)];
    if config.init_strategy == InitStrategy::Given {
        return starts;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let half = T::lit(0.5);
    for _ in 1..config.multistart_count {
        let start: Vec<T> = init
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                let u = T::lit(rng.random::<f64>());
                match (&config.bounds, config.init_strategy) {
                    (Some((lo, hi)), InitStrategy::RandomBox) => lo[j] + u * (hi[j] - lo[j]),
                    _ => {
                        let w = (half * c.abs()).max(T::one());
                        c + (T::lit(2.0) * u - T::one()) * w
                    }
                }
            })
            .collect();
        starts.push(project(start, config));
    }
    starts
}

fn project<T: Scalar>(mut theta: Vec<T>, config: &SolverConfig<T>) -> Vec<T> {
    if let Some((lo, hi)) = &config.bounds {
        for (t, (l, h)) in theta.iter_mut().zip(lo.iter().zip(hi)) {
            *t = t.clamp(*l, *h);
        }
    }
    theta
}

struct State<T: Scalar> {
    theta: Vec<T>,
    sse: T,
    jac: DMatrix<T>,
    /// `Jᵀr`, the descent direction of `S` up to a factor 2.
    descent: DVector<T>,
    /// Components not held at a bound by the sign of `descent`.
    free: Vec<bool>,
}

impl<T: Scalar> State<T> {
    fn projected_descent(&self) -> DVector<T> {
        DVector::from_iterator(
            self.descent.len(),
            self.descent.iter().zip(&self.free).map(|(g, f)| if *f { *g } else { T::zero() }),
        )
    }

    fn scaled_gradient(&self, y_norm: T) -> T {
        let g = self.projected_descent().norm();
        let jn = self.jac.norm();
        if jn == T::zero() {
            return g;
        }
        g / (jn * y_norm.max(T::one()))
    }
}

fn residuals<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    design: &Design<T>,
    y: &[T],
    theta: &[T],
) -> Result<DVector<T>> {
    let mut r = DVector::zeros(y.len());
    for (i, x) in design.points().iter().enumerate() {
        r[i] = y[i] - evaluate(model, x, theta)?;
    }
    Ok(r)
}

fn state_at<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    design: &Design<T>,
    y: &[T],
    theta: Vec<T>,
    config: &SolverConfig<T>,
) -> Result<State<T>> {
    let residual = residuals(model, design, y, &theta)?;
    let sse = residual.norm_squared();
    let jac = model_jacobian_matrix(model, design, &theta)?;
    if jac.iter().any(|v| !v.is_finite_value()) {
        return Err(Error::NonFinite("model Jacobian".into()));
    }
    let descent = jac.tr_mul(&residual);
    let free = match &config.bounds {
        None => vec![true; theta.len()],
        Some((lo, hi)) => (0..theta.len())
            .map(|j| {
                let g = descent[j];
                !((theta[j] <= lo[j] && g < T::zero()) || (theta[j] >= hi[j] && g > T::zero()))
            })
            .collect(),
    };
    Ok(State { theta, sse, jac, descent, free })
}

fn levenberg_marquardt<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    design: &Design<T>,
    y: &[T],
    start: &[T],
    config: &SolverConfig<T>,
) -> Result<ParameterEstimate<T>> {
    let p = start.len();
    let y_norm = y.iter().fold(T::zero(), |acc, v| acc + *v * *v).sqrt();
    let mut state = state_at(model, design, y, start.to_vec(), config)?;
    let mut a = state.jac.tr_mul(&state.jac);
    let max_diag = (0..p).fold(T::zero(), |m, j| m.max(a[(j, j)]));
    let mut mu = config.damping_init * max_diag.max(T::machine_epsilon());
    let mut nu = T::lit(2.0);
    let two = T::lit(2.0);
    let third = T::one() / T::lit(3.0);
    let half = T::lit(0.5);
    let eps = T::machine_epsilon();

    let mut iterations = 0;
    let mut grad = state.scaled_gradient(y_norm);
    while iterations < config.max_iterations && state.sse > T::zero() {
        iterations += 1;
        let free: Vec<usize> = (0..p).filter(|j| state.free[*j]).collect();
        if free.is_empty() {
            break;
        }
        let k = free.len();
        let damped = DMatrix::from_fn(k, k, |i, j| {
            a[(free[i], free[j])] + if i == j { mu } else { T::zero() }
        });
        let rhs = DVector::from_fn(k, |i, _| state.descent[free[i]]);
        let Some(chol) = damped.cholesky() else {
            mu *= nu;
            nu *= two;
            continue;
        };
        let h_free = chol.solve(&rhs);
        let negligible = free.iter().enumerate().all(|(i, j)| {
            h_free[i].abs() <= config.step_tolerance * (state.theta[*j].abs() + config.step_tolerance)
        });
        if negligible {
            break;
        }
        let mut candidate = state.theta.clone();
        for (i, j) in free.iter().enumerate() {
            candidate[*j] += h_free[i];
        }
        let projected = project(candidate.clone(), config);
        let (clipped, rest): (Vec<usize>, Vec<usize>) =
            free.iter().partition(|j| projected[**j] != candidate[**j]);
        let candidate = if clipped.is_empty() || rest.is_empty() {
            projected
        } else {
            // Pin the clipped components at the bound and re-solve for the rest.
            let m = DMatrix::from_fn(rest.len(), rest.len(), |i, j| {
                a[(rest[i], rest[j])] + if i == j { mu } else { T::zero() }
            });
            let rhs = DVector::from_fn(rest.len(), |i, _| {
                clipped.iter().fold(state.descent[rest[i]], |acc, c| {
                    acc - a[(rest[i], *c)] * (projected[*c] - state.theta[*c])
                })
            });
            let Some(chol) = m.cholesky() else {
                mu *= nu;
                nu *= two;
                continue;
            };
            let h_rest = chol.solve(&rhs);
            let mut pinned = projected;
            for (i, j) in rest.iter().enumerate() {
                pinned[*j] = state.theta[*j] + h_rest[i];
            }
            project(pinned, config)
        };
        let step: DVector<T> =
            DVector::from_iterator(p, candidate.iter().zip(&state.theta).map(|(c, t)| *c - *t));
        let r_new = residuals(model, design, y, &candidate)?;
        let sse_new = r_new.norm_squared();
        let predicted = two * step.dot(&state.descent) - step.dot(&(&a * &step));
        let rho = if predicted > T::zero() {
            (state.sse - sse_new) / predicted
        } else {
            -T::one()
        };
        // Below the rounding level of S a decrease cannot be observed; such
        // steps are taken only when they at least halve the gradient.
        let floor = T::lit(16.0) * eps * (state.sse + y_norm * state.sse.sqrt());
        let accepted = if rho > T::zero() && sse_new <= state.sse {
            Some(state_at(model, design, y, candidate, config)?)
        } else if sse_new <= state.sse + floor {
            let trial = state_at(model, design, y, candidate, config)?;
            (trial.scaled_gradient(y_norm) <= half * grad).then_some(trial)
        } else {
            None
        };
        match accepted {
            Some(next) => {
                state = next;
                a = state.jac.tr_mul(&state.jac);
                let rho = if rho > T::zero() { rho } else { T::one() };
                let t = (two * rho - T::one()).min(T::one());
                mu *= third.max(T::one() - t * t * t);
                nu = two;
                grad = state.scaled_gradient(y_norm);
            }
            None if predicted.abs() <= floor && sse_new <= state.sse + floor => {
                // The step is too short for S to resolve it; lengthen it.
                let mu_min = eps * (0..p).fold(T::zero(), |m, j| m.max(a[(j, j)]));
                if mu <= mu_min {
                    break;
                }
                mu = (mu * third).max(mu_min);
                nu = two;
            }
            None => {
                mu *= nu;
                nu *= two;
                if !mu.is_finite_value() {
                    break;
                }
            }
        }
    }

    // Weakly determined directions hide below the rounding floor of S; Newton
    // steps resolve them as long as the steps keep shrinking.
    let mut previous: Option<T> = None;
    for _ in 0..8 {
        if state.sse == T::zero() {
            break;
        }
        let free: Vec<usize> = (0..p).filter(|j| state.free[*j]).collect();
        if free.is_empty() {
            break;
        }
        let Ok(h_full) = newton_matrix(model, design, y, &state) else { break };
        let k = free.len();
        let m = DMatrix::from_fn(k, k, |i, j| h_full[(free[i], free[j])]);
        let rhs = DVector::from_fn(k, |i, _| state.descent[free[i]]);
        let Some(chol) = m.cholesky() else { break };
        let h = chol.solve(&rhs);
        let size = h.norm();
        if previous.is_some_and(|prev| size > half * prev) {
            break;
        }
        let mut candidate = state.theta.clone();
        for (i, j) in free.iter().enumerate() {
            candidate[*j] += h[i];
        }
        let Ok(trial) = state_at(model, design, y, project(candidate, config), config) else { break };
        let floor = T::lit(16.0) * eps * (state.sse + y_norm * state.sse.sqrt());
        let trial_grad = trial.scaled_gradient(y_norm);
        if trial.sse > state.sse + floor || trial_grad > grad.max(config.gradient_tolerance) {
            break;
        }
        state = trial;
        grad = trial_grad;
        previous = Some(size);
    }

    let converged = grad <= config.gradient_tolerance || state.sse == T::zero();
    Ok(ParameterEstimate {
        theta: state.theta,
        sse: state.sse,
        converged,
        iterations,
        gradient_norm: grad,
    })
}

/// Half the Hessian of `S`: `JᵀJ − Σ_i r_i ∇²f_i`, with `∇²f_i` from central
/// differences of the parameter gradient.
fn newton_matrix<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    design: &Design<T>,
    y: &[T],
    state: &State<T>,
) -> Result<DMatrix<T>> {
    let p = state.theta.len();
    let r = residuals(model, design, y, &state.theta)?;
    let mut h = state.jac.tr_mul(&state.jac);
    let base = T::machine_epsilon().cbrt();
    let two = T::lit(2.0);
    for k in 0..p {
        let step = base * (T::one() + state.theta[k].abs());
        let mut up = state.theta.clone();
        let mut down = state.theta.clone();
        up[k] += step;
        down[k] -= step;
        let width = up[k] - down[k];
        for (i, x) in design.points().iter().enumerate() {
            let gu = parameter_gradient(model, x, &up)?;
            let gd = parameter_gradient(model, x, &down)?;
            for j in 0..p {
                h[(j, k)] -= r[i] * (gu[j] - gd[j]) / width;
            }
        }
    }
    let sym = (&h + h.transpose()) / two;
    if sym.iter().any(|v| !v.is_finite_value()) {
        return Err(Error::NonFinite("Newton matrix".into()));
    }
    Ok(sym)
}

/// Sum of squared residuals at `theta`.
pub fn sum_of_squares<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    design: &Design<T>,
    y: &[T],
    theta: &[T],
) -> Result<T> {
    check_len("observations", design.n(), y.len())?;
    Ok(residuals(model, design, y, theta)?.norm_squared())
}
