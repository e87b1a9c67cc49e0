//! Benchmark protocol: evaluation grids, error metrics, percentile
//! statistics, Monte Carlo convergence traces, benchmark runs and the
//! quadratic validation against closed forms.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{stack_predictions, Design, Method, Model, NoiseModel, ObservationSet};
use crate::error::{check_len, Error, Result};
use crate::estimators::{
    cubature_at, linearization_at, lu_darmofal_rule, mc_moments, mc_parameter_samples,
    mcnamee_stenger_rule, sigma_point_rule, CubatureRule, McConfig, NormalStream, SequenceKind,
    SolverSettings,
};
use crate::lsq::fit_values;
use crate::models::QuadraticModel;
use crate::oracle::QuadraticOracleContext;
use crate::report::format_real;
use crate::scalar::Scalar;

/// Uniform tensor grid over a box, endpoints included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points_per_dim: usize,
    /// `(lower, upper)` per input dimension.
    pub bounds: Vec<(f64, f64)>,
}

impl GridSpec {
    pub fn new(points_per_dim: usize, bounds: Vec<(f64, f64)>) -> Result<Self> {
        let g = GridSpec { points_per_dim, bounds };
        g.validate()?;
        Ok(g)
    }

    /// `[-1, 1]^dim_x` with 100 points per dimension.
    pub fn unit_box(dim_x: usize) -> Self {
        GridSpec { points_per_dim: 100, bounds: vec![(-1.0, 1.0); dim_x] }
    }

    pub fn dim_x(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.points_per_dim < 2 {
            return Err(Error::InvalidArgument("grid needs at least 2 points per dimension".into()));
        }
        if self.bounds.is_empty() {
            return Err(Error::InvalidArgument("grid needs at least one dimension".into()));
        }
        if self.bounds.iter().any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::InvalidArgument("grid bounds must be finite with lower < upper".into()));
        }
        Ok(())
    }

    /// Grid points with the first coordinate varying slowest.
    pub fn points<T: Scalar>(&self) -> Result<Vec<Vec<T>>> {
        self.validate()?;
        let m = self.points_per_dim;
        let axes: Vec<Vec<T>> = self
            .bounds
            .iter()
            .map(|&(l, u)| {
                (0..m)
                    .map(|i| {
                        if i == m - 1 {
                            T::lit(u)
                        } else {
                            T::lit(l + (u - l) * i as f64 / (m - 1) as f64)
                        }
                    })
                    .collect()
            })
            .collect();
        let d = self.dim_x();
        let total = m
            .checked_pow(d as u32)
            .ok_or_else(|| Error::InvalidArgument("grid too large".into()))?;
        Ok((0..total)
            .map(|mut idx| {
                let mut p = vec![T::zero(); d];
                for k in (0..d).rev() {
                    p[k] = axes[k][idx % m];
                    idx /= m;
                }
                p
            })
            .collect())
    }
}

/// `|v_method − v_exact|`.
pub fn pointwise_error<T: Scalar>(v_method: T, v_exact: T) -> T {
    (v_method - v_exact).abs()
}

/// Root mean squared difference between two grids of variances.
pub fn rms_error<T: Scalar>(v_method: &[T], v_reference: &[T]) -> Result<T> {
    check_len("rms_error inputs", v_reference.len(), v_method.len())?;
    if v_method.is_empty() {
        return Err(Error::InvalidArgument("rms_error of empty grid".into()));
    }
    let ss = v_method
        .iter()
        .zip(v_reference)
        .fold(T::zero(), |a, (m, r)| a + (*m - *r) * (*m - *r));
    Ok((ss / T::from_count(v_method.len())).sqrt())
}

/// Euclidean distance between estimated and true parameters.
pub fn parameter_error<T: Scalar>(theta_hat: &[T], theta_true: &[T]) -> Result<T> {
    check_len("parameter_error inputs", theta_true.len(), theta_hat.len())?;
    Ok(theta_hat
        .iter()
        .zip(theta_true)
        .fold(T::zero(), |a, (h, t)| a + (*h - *t) * (*h - *t))
        .sqrt())
}

/// Summary of a list of errors: population standard deviation and
/// linearly interpolated percentiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercentileStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub max: f64,
}

pub fn percentile_stats(values: &[f64]) -> Result<PercentileStats> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("percentile_stats of empty list".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("percentile_stats input".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let std = (sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let q = |p: f64| {
        let pos = p * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    };
    Ok(PercentileStats {
        mean,
        std,
        min: sorted[0],
        p25: q(0.25),
        p50: q(0.5),
        p75: q(0.75),
        max: sorted[sorted.len() - 1],
    })
}

/// Log-spaced sample counts `1, 2, 5 × 10^k` from 100 up to `max` (included).
pub fn default_convergence_grid(max: usize) -> Vec<usize> {
    let mut grid = Vec::new();
    let mut decade = 100usize;
    'outer: loop {
        for m in [1, 2, 5] {
            let v = decade * m;
            if v >= max {
                break 'outer;
            }
            grid.push(v);
        }
        decade *= 10;
    }
    grid.push(max);
    grid
}

/// `(N, V^MC_N(x_probe))` for ascending `N`, every entry computed from the
/// first `N` samples of one stream around `f̃(x̃, θ*)`.
#[allow(clippy::too_many_arguments)]
pub fn mc_convergence_trace<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    design: &Arc<Design<T>>,
    noise: &NoiseModel<T>,
    theta_true: &[T],
    x_probe: &[T],
    n_grid: &[usize],
    seed: u64,
    sequence: SequenceKind,
    solver: &SolverSettings<T>,
) -> Result<Vec<(usize, T)>> {
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] < 2 {
        return Err(Error::InvalidArgument(
            "sample counts must be ascending and at least 2".into(),
        ));
    }
    let center = ObservationSet::new(Arc::clone(design), stack_predictions(model, design, theta_true)?)?;
    let n_max = *n_grid.last().expect("non-empty");
    let cfg = McConfig { n_samples: n_max, seed, sequence };
    let solver = SolverSettings { init: theta_true.to_vec(), ..solver.clone() };
    let samples = mc_parameter_samples(model, &center, noise, &cfg, &solver)?;
    let probe = [x_probe.to_vec()];
    n_grid
        .iter()
        .map(|&n| {
            let (_, v) = mc_moments(model, &samples.prefix(n), &probe)?;
            Ok((n, v[0]))
        })
        .collect()
}

pub fn write_convergence_csv<T: Scalar, W: Write>(trace: &[(usize, T)], mut out: W) -> Result<()> {
    writeln!(out, "n_samples,v_mc")?;
    for (n, v) in trace {
        writeln!(out, "{n},{}", format_real(v.to_f64_lossy()))?;
    }
    Ok(())
}

/// Settings of [`run_benchmark`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    /// Monte Carlo samples of the reference variance.
    pub n_mc: usize,
    /// Observation sets on which the methods are evaluated.
    pub n_eval_samples: usize,
    pub methods: Vec<Method>,
    pub grid: GridSpec,
    pub seed: u64,
    /// Sigma-point `κ`; defaults to `3 − n`.
    pub kappa: Option<f64>,
    #[serde(default)]
    pub sequence: SequenceKind,
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no methods selected".into()));
        }
        for m in &self.methods {
            if matches!(m, Method::MonteCarlo | Method::Exact) {
                return Err(Error::InvalidArgument(format!(
                    "benchmark methods must be among LIN, SP, MS, LD, got {m}"
                )));
            }
        }
        if self.n_eval_samples == 0 {
            return Err(Error::InvalidArgument("n_eval_samples must be >= 1".into()));
        }
        self.grid.validate()
    }
}

/// Errors of one observation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_index: usize,
    pub theta_hat: Vec<f64>,
    pub param_error: f64,
    /// rms error against the reference, per method.
    pub rms: BTreeMap<Method, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRun {
    pub model_id: String,
    pub design_id: String,
    pub n_mc: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub records: Vec<SampleRecord>,
    /// Observation sets whose fit did not converge or on which a method
    /// failed numerically.
    pub excluded_samples: Vec<usize>,
    /// Monte Carlo samples dropped from the reference.
    pub reference_excluded: usize,
    pub grid_points: Vec<Vec<f64>>,
    pub reference_variance: Vec<f64>,
}

impl BenchmarkRun {
    pub fn rms_values(&self, method: Method) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.rms.get(&method).copied()).collect()
    }

    pub fn median_rms(&self, method: Method) -> Option<f64> {
        let v = self.rms_values(method);
        percentile_stats(&v).ok().map(|s| s.p50)
    }

    /// Percentile statistics keyed by method tag, plus `param_error`.
    pub fn stats(&self) -> Result<BTreeMap<String, PercentileStats>> {
        let mut out = BTreeMap::new();
        for &m in &self.methods {
            out.insert(m.tag().to_string(), percentile_stats(&self.rms_values(m))?);
        }
        let pe: Vec<f64> = self.records.iter().map(|r| r.param_error).collect();
        out.insert("param_error".into(), percentile_stats(&pe)?);
        Ok(out)
    }

    /// `sample_index,param_error,rms_lin,rms_sp,rms_ms,rms_ld`; methods not
    /// run leave their column empty.
    pub fn write_results_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "sample_index,param_error,rms_lin,rms_sp,rms_ms,rms_ld")?;
        let cols = [Method::Linearization, Method::SigmaPoint, Method::McNameeStenger, Method::LuDarmofal];
        for r in &self.records {
            let mut row = vec![r.sample_index.to_string(), format_real(r.param_error)];
            row.extend(cols.iter().map(|m| r.rms.get(m).map_or(String::new(), |v| format_real(*v))));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn stats_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.stats()?).map_err(|e| Error::Io(e.to_string()))
    }
}

fn rule_for<T: Scalar>(method: Method, n: usize, sigma: T, kappa: Option<f64>) -> Result<Option<CubatureRule<T>>> {
    Ok(match method {
        Method::SigmaPoint => {
            let k = kappa.unwrap_or_else(|| crate::estimators::default_kappa(n));
            Some(sigma_point_rule(n, sigma, T::lit(k))?)
        }
        Method::McNameeStenger => Some(mcnamee_stenger_rule(n, sigma)?),
        Method::LuDarmofal => Some(lu_darmofal_rule(n, sigma)?),
        _ => None,
    })
}

/// Benchmark protocol: a Monte Carlo reference variance on the grid around
/// `f̃(x̃, θ*)`, then for each of the first `n_eval_samples` observation sets
/// of the same stream, the rms error of every method against the reference
/// and the parameter estimation error.
pub fn run_benchmark<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    design: &Arc<Design<T>>,
    theta_true: &[T],
    noise: &NoiseModel<T>,
    cfg: &BenchmarkConfig,
    solver: &SolverSettings<T>,
) -> Result<BenchmarkRun> {
    cfg.validate()?;
    check_len("grid dimension", model.dim_x(), cfg.grid.dim_x())?;
    let grid: Vec<Vec<T>> = cfg.grid.points()?;
    let y_star = stack_predictions(model, design, theta_true)?;
    let center = ObservationSet::new(Arc::clone(design), y_star.clone())?;
    let solver = SolverSettings { init: theta_true.to_vec(), ..solver.clone() };

    let mc_cfg = McConfig { n_samples: cfg.n_mc, seed: cfg.seed, sequence: cfg.sequence };
    let samples = mc_parameter_samples(model, &center, noise, &mc_cfg, &solver)?;
    let (_, reference) = mc_moments(model, &samples.thetas(), &grid)?;

    let n = design.n();
    let rules: Vec<(Method, Option<CubatureRule<T>>)> = cfg
        .methods
        .iter()
        .map(|&m| Ok((m, rule_for(m, n, noise.sigma(), cfg.kappa)?)))
        .collect::<Result<_>>()?;

    let stream = NormalStream::new(cfg.sequence, n, cfg.seed)?;
    let outcomes: Vec<Result<Option<SampleRecord>>> = (0..cfg.n_eval_samples)
        .into_par_iter()
        .map(|i| {
            let z = stream.row(i as u64);
            let y: Vec<T> = y_star
                .iter()
                .zip(z)
                .map(|(c, zi)| *c + noise.sigma() * T::lit(zi))
                .collect();
            let est = fit_values(model, design, &y, theta_true, &solver.outer)?;
            if !est.converged {
                return Ok(None);
            }
            let mut rms = BTreeMap::new();
            for (m, rule) in &rules {
                let report = match rule {
                    Some(rule) => cubature_at(rule, model, design, &est.theta, &grid, &solver),
                    None => linearization_at(model, design, &est.theta, noise, &grid),
                };
                let report = match report {
                    Ok(r) => r,
                    Err(Error::RankDeficient { .. } | Error::CubaturePointFailed { .. } | Error::NonFinite(_)) => {
                        return Ok(None)
                    }
                    Err(e) => return Err(e),
                };
                rms.insert(*m, rms_error(&report.variance, &reference)?.to_f64_lossy());
            }
            Ok(Some(SampleRecord {
                sample_index: i,
                theta_hat: est.theta.iter().map(|v| v.to_f64_lossy()).collect(),
                param_error: parameter_error(&est.theta, theta_true)?.to_f64_lossy(),
                rms,
            }))
        })
        .collect();

    let mut records = Vec::new();
    let mut excluded_samples = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        match o? {
            Some(r) => records.push(r),
            None => excluded_samples.push(i),
        }
    }
    Ok(BenchmarkRun {
        model_id: model.id().to_string(),
        design_id: design.label().to_string(),
        n_mc: cfg.n_mc,
        seed: cfg.seed,
        methods: cfg.methods.clone(),
        records,
        excluded_samples,
        reference_excluded: samples.excluded.len(),
        grid_points: grid.iter().map(|p| p.iter().map(|v| v.to_f64_lossy()).collect()).collect(),
        reference_variance: reference.iter().map(|v| v.to_f64_lossy()).collect(),
    })
}

/// Settings of [`validate_quadratic`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationConfig {
    pub model: QuadraticModel<f64>,
    pub design: Design<f64>,
    pub theta_true: Vec<f64>,
    pub sigma: f64,
    pub grid: GridSpec,
    /// Approximations compared with the exact variance; any of LIN, SP, MS, LD.
    pub methods: Vec<Method>,
    pub kappa: f64,
    /// The run passes when the mean LD error does not exceed this bound.
    pub exactness_bound: f64,
}

/// Per-grid-point comparison of approximations with the exact variance,
/// using noise-free observations `f̃(x̃, θ*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRun {
    pub grid_points: Vec<Vec<f64>>,
    pub theta_bar: Vec<f64>,
    pub exact: Vec<f64>,
    /// `(method, V^method on the grid)`.
    pub approximations: Vec<(Method, Vec<f64>)>,
    pub exactness_bound: f64,
}

impl ValidationRun {
    pub fn errors(&self, method: Method) -> Option<Vec<f64>> {
        self.approximations.iter().find(|(m, _)| *m == method).map(|(_, v)| {
            v.iter().zip(&self.exact).map(|(a, e)| pointwise_error(*a, *e)).collect()
        })
    }

    /// `|√V^method − √V|`, the error on the standard-deviation scale.
    pub fn std_errors(&self, method: Method) -> Option<Vec<f64>> {
        self.approximations.iter().find(|(m, _)| *m == method).map(|(_, v)| {
            v.iter().zip(&self.exact).map(|(a, e)| (a.max(0.0).sqrt() - e.sqrt()).abs()).collect()
        })
    }

    /// Variance-scale error statistics keyed by method tag.
    pub fn stats(&self) -> Result<BTreeMap<String, PercentileStats>> {
        self.approximations
            .iter()
            .map(|(m, _)| Ok((m.tag().to_string(), percentile_stats(&self.errors(*m).expect("present"))?)))
            .collect()
    }

    /// Standard-deviation-scale error statistics keyed by method tag.
    pub fn std_stats(&self) -> Result<BTreeMap<String, PercentileStats>> {
        self.approximations
            .iter()
            .map(|(m, _)| Ok((m.tag().to_string(), percentile_stats(&self.std_errors(*m).expect("present"))?)))
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.errors(Method::LuDarmofal)
            .and_then(|e| percentile_stats(&e).ok())
            .is_some_and(|s| s.mean <= self.exactness_bound)
    }

    /// `x1..xd,v_exact,delta_<method>...` with one row per grid point.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.grid_points.first().map_or(0, Vec::len);
        let mut header: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
        header.push("v_exact".into());
        let errors: Vec<Vec<f64>> = self
            .approximations
            .iter()
            .map(|(m, _)| {
                header.push(format!("delta_{}", m.tag().to_ascii_lowercase()));
                self.errors(*m).expect("present")
            })
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (j, x) in self.grid_points.iter().enumerate() {
            let mut row: Vec<String> = x.iter().map(|v| format_real(*v)).collect();
            row.push(format_real(self.exact[j]));
            row.extend(errors.iter().map(|e| format_real(e[j])));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Variance-scale statistics as JSON, keyed by method tag.
    pub fn stats_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.stats()?).map_err(|e| Error::Io(e.to_string()))
    }

    /// Standard-deviation-scale statistics as JSON, keyed by method tag.
    pub fn std_stats_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.std_stats()?).map_err(|e| Error::Io(e.to_string()))
    }
}

pub fn validate_quadratic(cfg: &ValidationConfig, solver: &SolverSettings<f64>) -> Result<ValidationRun> {
    let ctx = QuadraticOracleContext::new(
        cfg.model.clone(),
        cfg.design.clone(),
        cfg.sigma,
        Some(cfg.theta_true.clone()),
    )?;
    check_len("grid dimension", cfg.model.dim_x(), cfg.grid.dim_x())?;
    let grid: Vec<Vec<f64>> = cfg.grid.points()?;
    let design = &cfg.design;
    let y_star = stack_predictions(&cfg.model, design, &cfg.theta_true)?;
    let est = fit_values(&cfg.model, design, &y_star, &solver.init, &solver.outer)?;
    if !est.converged {
        return Err(Error::FitFailed("fit of the noise-free observations did not converge".into()));
    }
    let theta_bar = est.theta;
    let noise = NoiseModel::new(cfg.sigma)?;
    let exact: Vec<f64> = grid
        .par_iter()
        .map(|x| ctx.exact_prediction_uncertainty(x))
        .collect::<Result<_>>()?;
    let n = design.n();
    let approximations = cfg
        .methods
        .iter()
        .map(|&m| {
            let report = match rule_for(m, n, cfg.sigma, Some(cfg.kappa))? {
                Some(rule) => cubature_at(&rule, &cfg.model, design, &theta_bar, &grid, solver)?,
                None if m == Method::Linearization => {
                    linearization_at(&cfg.model, design, &theta_bar, &noise, &grid)?
                }
                None => {
                    return Err(Error::InvalidArgument(format!(
                        "validation methods must be among LIN, SP, MS, LD, got {m}"
                    )))
                }
            };
            Ok((m, report.variance))
        })
        .collect::<Result<_>>()?;
    Ok(ValidationRun {
        grid_points: grid,
        theta_bar,
        exact,
        approximations,
        exactness_bound: cfg.exactness_bound,
    })
}
