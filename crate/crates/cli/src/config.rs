//! Run configuration: presets, TOML files and flag overrides.

use std::path::{Path, PathBuf};

use predunc::bench::GridSpec;
use predunc::designs::named_benchmark_design;
use predunc::estimators::sobol::SequenceKind;
use predunc::models::{BuiltinModel, NrtlModel, NrtlSpec};
use predunc::{Design, ExponentialModel, Method, QuadraticModel};
use serde::{Deserialize, Serialize};

/// Errors in the configuration itself; these map to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub model: ModelSection,
    pub design: DesignSection,
    pub noise: NoiseSection,
    pub estimators: EstimatorSection,
    pub grid: GridSection,
    pub validation: ValidationSection,
    pub convergence: ConvergenceSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// `quadratic`, `exponential` or `nrtl`.
    #[serde(rename = "type")]
    pub kind: String,
    /// Preset the section was derived from; selects the short design names.
    #[serde(default)]
    pub preset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_true: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a12: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a21: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c12: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_bounds: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_bounds: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Explicit design matrix, one row per observation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub methods: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    pub n_mc: usize,
    pub n_eval_samples: usize,
    pub sequence: SequenceKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub points_per_dim: usize,
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationSection {
    pub exactness_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    pub probe: Vec<f64>,
    pub max_samples: usize,
}

pub const PRESETS: [&str; 4] = ["quad1d", "quad2d", "exp", "nrtl"];

/// Paper settings of a model preset, with the given design name.
pub fn preset(name: &str, design: &str) -> Result<RunConfig, ConfigError> {
    let quad = |d: usize, theta: Vec<f64>| ModelSection {
        kind: "quadratic".into(),
        preset: String::new(),
        theta_true: Some(theta),
        alpha: Some(vec![1.0; d]),
        beta: Some(vec![1.0; d]),
        a12: None,
        a21: None,
        c12: None,
        lower_bounds: None,
        upper_bounds: None,
    };
    let (mut model, bounds, probe) = match name {
        "quad1d" => (quad(1, vec![2.74, -4.6]), vec![(-1.0, 1.0)], vec![0.0]),
        "quad2d" => (
            quad(2, vec![27.39, -46.04, -91.81]),
            vec![(-1.0, 1.0); 2],
            vec![-1.0, 0.03],
        ),
        "exp" => {
            let (lo, hi) = ExponentialModel::default_bounds::<f64>();
            let m = ModelSection {
                kind: "exponential".into(),
                alpha: None,
                beta: None,
                theta_true: Some(vec![0.2, 1.2]),
                lower_bounds: Some(lo),
                upper_bounds: Some(hi),
                ..quad(1, vec![])
            };
            (m, vec![(-1.0, 1.0)], vec![0.0])
        }
        "nrtl" => {
            let spec = NrtlSpec::<f64>::default();
            let m = ModelSection {
                kind: "nrtl".into(),
                alpha: None,
                beta: None,
                theta_true: Some(vec![-173.4982, -61.8175]),
                a12: Some(spec.a12),
                a21: Some(spec.a21),
                c12: Some(spec.c12),
                ..quad(1, vec![])
            };
            (m, vec![(0.0, 1.0), (298.15, 373.15)], vec![0.0, 336.86])
        }
        other => {
            return Err(bad(format!(
                "unknown model `{other}`; expected one of {}",
                PRESETS.join(", ")
            )))
        }
    };
    model.preset = name.into();
    Ok(RunConfig {
        seed: 42,
        out: PathBuf::from("runs"),
        model,
        design: DesignSection { name: Some(design.into()), points: None },
        noise: NoiseSection { sigma: 0.1 },
        estimators: EstimatorSection {
            methods: ["LIN", "SP", "MS", "LD"].map(String::from).to_vec(),
            kappa: None,
            n_mc: 100_000,
            n_eval_samples: 1000,
            sequence: SequenceKind::Sobol,
        },
        grid: GridSection { points_per_dim: 100, bounds },
        validation: ValidationSection { exactness_bound: 1e-9 },
        convergence: ConvergenceSection { probe, max_samples: 1_000_000 },
    })
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub model: Option<String>,
    pub design: Option<String>,
    pub sigma: Option<f64>,
    pub n_mc: Option<usize>,
    pub seed: Option<u64>,
    pub kappa: Option<f64>,
    pub out: Option<PathBuf>,
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_table() && v.is_table() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// Preset defaults, then the file, then the flags.
pub fn resolve(
    default_model: &str,
    default_design: &str,
    file: Option<&Path>,
    flags: &Overrides,
) -> Result<RunConfig, ConfigError> {
    let file_value: Option<toml::Value> = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| bad(format!("cannot read config {}: {e}", path.display())))?;
            Some(toml::from_str(&text).map_err(|e| bad(format!("invalid config {}: {e}", path.display())))?)
        }
        None => None,
    };
    let file_str = |section: &str, key: &str| {
        file_value
            .as_ref()
            .and_then(|v| v.get(section))
            .and_then(|s| s.get(key))
            .and_then(|k| k.as_str())
            .map(String::from)
    };
    let model_name = flags
        .model
        .clone()
        .or_else(|| file_str("model", "preset"))
        .unwrap_or_else(|| default_model.to_string());
    let design_name = file_str("design", "name").unwrap_or_else(|| default_design.to_string());

    let base = preset(&model_name, &design_name)?;
    let mut value = toml::Value::try_from(&base).map_err(|e| bad(e.to_string()))?;
    if let Some(mut fv) = file_value {
        if let Some(t) = fv.as_table_mut() {
            if flags.model.is_some() {
                t.remove("model");
            }
            // a model section that names its type is complete on its own
            if t.get("model").and_then(|m| m.get("type")).is_some() {
                if let Some(v) = value.as_table_mut() {
                    v.remove("model");
                }
            }
            if flags.design.is_some() {
                t.remove("design");
            }
            // an explicit matrix in the file replaces the preset's named design
            if t.get("design").and_then(|d| d.get("points")).is_some() {
                if let Some(d) = value.get_mut("design").and_then(|d| d.as_table_mut()) {
                    d.remove("name");
                }
            }
        }
        merge(&mut value, fv);
    }
    let mut cfg: RunConfig = value.try_into().map_err(|e: toml::de::Error| bad(format!("invalid config: {e}")))?;

    if let Some(d) = &flags.design {
        cfg.design = DesignSection { name: Some(d.clone()), points: None };
    }
    if let Some(s) = flags.sigma {
        cfg.noise.sigma = s;
    }
    if let Some(n) = flags.n_mc {
        cfg.estimators.n_mc = n;
        cfg.convergence.max_samples = n;
    }
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(k) = flags.kappa {
        cfg.estimators.kappa = Some(k);
    }
    if let Some(o) = &flags.out {
        cfg.out = o.clone();
    }
    cfg.check()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn theta_true(&self) -> Result<Vec<f64>, ConfigError> {
        self.model
            .theta_true
            .clone()
            .ok_or_else(|| bad("model.theta_true is required"))
    }

    pub fn build_model(&self) -> Result<BuiltinModel<f64>, ConfigError> {
        let m = &self.model;
        match m.kind.as_str() {
            "quadratic" => {
                let alpha = m.alpha.clone().ok_or_else(|| bad("quadratic model needs alpha"))?;
                let beta = m.beta.clone().unwrap_or_else(|| vec![1.0; alpha.len()]);
                Ok(BuiltinModel::Quadratic(
                    QuadraticModel::new(alpha, beta).map_err(|e| bad(e.to_string()))?,
                ))
            }
            "exponential" => Ok(BuiltinModel::Exponential(ExponentialModel)),
            "nrtl" => {
                let d = NrtlSpec::<f64>::default();
                Ok(BuiltinModel::Nrtl(NrtlModel::new(NrtlSpec {
                    a12: m.a12.unwrap_or(d.a12),
                    a21: m.a21.unwrap_or(d.a21),
                    c12: m.c12.unwrap_or(d.c12),
                })))
            }
            other => Err(bad(format!("unknown model type `{other}`"))),
        }
    }

    /// Named designs accept the short forms `factorial`, `equidistant` and
    /// `validation`, completed with the model preset.
    pub fn build_design(&self) -> Result<Design, ConfigError> {
        match (&self.design.name, &self.design.points) {
            (_, Some(points)) => Design::new("explicit", points.clone()).map_err(|e| bad(e.to_string())),
            (Some(name), None) => {
                let full = match name.as_str() {
                    "validation" => "quad2d_validation".to_string(),
                    "factorial" | "equidistant" => format!("{}_{name}", self.model.preset),
                    other => other.to_string(),
                };
                named_benchmark_design(&full).map_err(|e| bad(format!("design `{name}`: {e}")))
            }
            (None, None) => Err(bad("design needs a name or explicit points")),
        }
    }

    /// Configured parameter box, else the model's default box.
    pub fn bounds(&self) -> Result<Option<(Vec<f64>, Vec<f64>)>, ConfigError> {
        match (&self.model.lower_bounds, &self.model.upper_bounds) {
            (Some(lo), Some(hi)) => Ok(Some((lo.clone(), hi.clone()))),
            (None, None) => Ok(self.build_model()?.default_bounds()),
            _ => Err(bad("lower_bounds and upper_bounds must be given together")),
        }
    }

    pub fn methods(&self) -> Result<Vec<Method>, ConfigError> {
        self.estimators
            .methods
            .iter()
            .map(|m| Method::parse(m).map_err(|e| bad(format!("estimator list: {e}"))))
            .collect()
    }

    pub fn grid(&self) -> Result<GridSpec, ConfigError> {
        GridSpec::new(self.grid.points_per_dim, self.grid.bounds.clone()).map_err(|e| bad(e.to_string()))
    }

    /// Cross-section consistency: resolvable names and agreeing dimensions.
    pub fn check(&self) -> Result<(), ConfigError> {
        let model = self.build_model()?;
        let design = self.build_design()?;
        use predunc::Model;
        if design.dim_x() != model.dim_x() {
            return Err(bad(format!(
                "design `{}` has {} input dimensions, model needs {}",
                design.label(),
                design.dim_x(),
                model.dim_x()
            )));
        }
        if let Some(theta) = &self.model.theta_true {
            if theta.len() != model.dim_theta() {
                return Err(bad(format!(
                    "theta_true has {} entries, model needs {}",
                    theta.len(),
                    model.dim_theta()
                )));
            }
        }
        if let Some((lo, hi)) = self.bounds()? {
            if lo.len() != model.dim_theta() || hi.len() != model.dim_theta() {
                return Err(bad("parameter bounds must match the parameter dimension"));
            }
        }
        if self.grid.bounds.len() != model.dim_x() {
            return Err(bad("grid bounds must match the input dimension"));
        }
        if self.convergence.probe.len() != model.dim_x() {
            return Err(bad("convergence probe must match the input dimension"));
        }
        if !(self.noise.sigma > 0.0) || !self.noise.sigma.is_finite() {
            return Err(bad("noise.sigma must be positive"));
        }
        self.methods()?;
        self.grid()?;
        Ok(())
    }
}
