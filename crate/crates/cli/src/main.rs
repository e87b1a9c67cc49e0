use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use predunc::bench::{
    default_convergence_grid, mc_convergence_trace, run_benchmark, validate_quadratic,
    write_convergence_csv, BenchmarkConfig, ValidationConfig,
};
use predunc::estimators::{default_kappa, SolverSettings};
use predunc::models::BuiltinModel;
use predunc::report::format_real;
use predunc::{Method, NoiseModel};

mod config;

use config::{ConfigError, Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "predunc", version, about = "Prediction uncertainty of nonlinear regression models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compare LIN/SP/MS/LD with the exact variance of the quadratic model.
    ValidateQuadratic(Common),
    /// Monte Carlo reference plus per-sample rms errors of each method.
    Benchmark(Common),
    /// Monte Carlo variance at a probe point over the number of samples.
    McConvergence(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML run configuration; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model preset: quad1d, quad2d, exp or nrtl.
    #[arg(long)]
    model: Option<String>,
    /// Named design, or `factorial` / `equidistant` / `validation`.
    #[arg(long)]
    design: Option<String>,
    /// Observation noise standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    /// Monte Carlo sample count.
    #[arg(long = "n-mc")]
    n_mc: Option<usize>,
    /// Seed for all random streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Sigma-point spread parameter.
    #[arg(long)]
    kappa: Option<f64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Parent directory of the run directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    dump_config: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            model: self.model.clone(),
            design: self.design.clone(),
            sigma: self.sigma,
            n_mc: self.n_mc,
            seed: self.seed,
            kappa: self.kappa,
            out: self.out.clone(),
        }
    }
}

/// Exit 2: configuration or validation error. Exit 3: numerical failure.
enum Failure {
    Config(String),
    Numeric(String),
    Other(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<predunc::Error> for Failure {
    fn from(e: predunc::Error) -> Self {
        use predunc::Error as E;
        match e {
            E::DimensionMismatch { .. }
            | E::InvalidArgument(_)
            | E::NotOrthogonal(_)
            | E::UnknownName(_)
            | E::Missing(_) => Failure::Config(e.to_string()),
            E::NonFinite(_)
            | E::RankDeficient { .. }
            | E::CubaturePointFailed { .. }
            | E::ExclusionBudgetExceeded { .. }
            | E::FitFailed(_) => Failure::Numeric(e.to_string()),
            E::Io(_) => Failure::Other(anyhow::anyhow!(e)),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, defaults) = match &cli.command {
        Command::ValidateQuadratic(c) => (c, ("quad2d", "validation")),
        Command::Benchmark(c) => (c, ("quad1d", "factorial")),
        Command::McConvergence(c) => (c, ("quad2d", "factorial")),
    };
    match run(&cli.command, common, defaults) {
        Ok(code) => code,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: &Command, common: &Common, defaults: (&str, &str)) -> Result<ExitCode, Failure> {
    let cfg = config::resolve(defaults.0, defaults.1, common.config.as_deref(), &common.overrides())?;
    if common.dump_config {
        print!("{}", cfg.to_toml());
        return Ok(ExitCode::SUCCESS);
    }
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("thread pool")?;
    }
    let theta_true = cfg.theta_true()?;
    let model = cfg.build_model()?;
    let dir = create_run_dir(&cfg)?;
    fs::write(dir.join("resolved-config"), cfg.to_toml())?;
    let code = match command {
        Command::ValidateQuadratic(_) => validate(&cfg, model, theta_true, &dir)?,
        Command::Benchmark(_) => benchmark(&cfg, &model, theta_true, &dir)?,
        Command::McConvergence(_) => convergence(&cfg, &model, theta_true, &dir)?,
    };
    println!("run directory: {}", dir.display());
    Ok(code)
}

fn create_run_dir(cfg: &RunConfig) -> Result<PathBuf, Failure> {
    let stamp = chrono::Local::now().format("%Y%m%dT%H%M%S%.3f");
    let base = format!("{stamp}-seed{}", cfg.seed);
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    for k in 0.. {
        let name = if k == 0 { base.clone() } else { format!("{base}-{k}") };
        let dir = cfg.out.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!()
}

fn solver(cfg: &RunConfig, init: Vec<f64>) -> Result<SolverSettings<f64>, Failure> {
    let mut s = SolverSettings::new(init).with_bounds(cfg.bounds()?);
    s.outer.seed = cfg.seed;
    Ok(s)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, Failure> {
    Ok(BufWriter::new(
        fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn validate(cfg: &RunConfig, model: BuiltinModel<f64>, theta_true: Vec<f64>, dir: &Path) -> Result<ExitCode, Failure> {
    let BuiltinModel::Quadratic(model) = model else {
        return Err(Failure::Config(format!(
            "validate-quadratic needs a quadratic model, got {}",
            cfg.model.kind
        )));
    };
    let design = cfg.build_design()?;
    let kappa = cfg.estimators.kappa.unwrap_or_else(|| default_kappa(design.n()));
    let vc = ValidationConfig {
        model,
        design,
        theta_true: theta_true.clone(),
        sigma: cfg.noise.sigma,
        grid: cfg.grid()?,
        methods: cfg.methods()?.into_iter().filter(|m| *m != Method::MonteCarlo).collect(),
        kappa,
        exactness_bound: cfg.validation.exactness_bound,
    };
    let run = validate_quadratic(&vc, &solver(cfg, theta_true)?)?;
    run.write_csv(create(&dir.join("validation.csv"))?)?;
    fs::write(dir.join("stats.json"), run.stats_json()?)?;
    fs::write(dir.join("stats_std.json"), run.std_stats_json()?)?;
    for (tag, s) in run.stats()? {
        println!("{tag:>4}: mean {:.3e}  max {:.3e}", s.mean, s.max);
    }
    if run.passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "mean LD error exceeds the exactness bound {:e}",
            cfg.validation.exactness_bound
        );
        Ok(ExitCode::from(3))
    }
}

fn benchmark(cfg: &RunConfig, model: &BuiltinModel<f64>, theta_true: Vec<f64>, dir: &Path) -> Result<ExitCode, Failure> {
    let design = Arc::new(cfg.build_design()?);
    let bc = BenchmarkConfig {
        n_mc: cfg.estimators.n_mc,
        n_eval_samples: cfg.estimators.n_eval_samples,
        methods: cfg.methods()?,
        grid: cfg.grid()?,
        seed: cfg.seed,
        kappa: cfg.estimators.kappa,
        sequence: cfg.estimators.sequence,
    };
    let noise = NoiseModel::new(cfg.noise.sigma)?;
    let run = run_benchmark(model, &design, &theta_true, &noise, &bc, &solver(cfg, theta_true.clone())?)?;
    run.write_results_csv(create(&dir.join("results.csv"))?)?;
    fs::write(dir.join("stats.json"), run.stats_json()?)?;
    let mut reference = String::new();
    let d = run.grid_points.first().map_or(0, Vec::len);
    let header: Vec<String> = (1..=d).map(|k| format!("x{k}")).chain(["v_mc".to_string()]).collect();
    reference.push_str(&header.join(","));
    reference.push('\n');
    for (x, v) in run.grid_points.iter().zip(&run.reference_variance) {
        let row: Vec<String> = x.iter().chain([v]).map(|v| format_real(*v)).collect();
        reference.push_str(&row.join(","));
        reference.push('\n');
    }
    fs::write(dir.join("reference.csv"), reference)?;
    for m in &run.methods {
        if let Some(med) = run.median_rms(*m) {
            println!("{:>4}: median rms error {med:.3e}", m.tag());
        }
    }
    println!(
        "{} records, {} evaluation samples excluded, {} reference samples excluded",
        run.records.len(),
        run.excluded_samples.len(),
        run.reference_excluded
    );
    Ok(ExitCode::SUCCESS)
}

fn convergence(cfg: &RunConfig, model: &BuiltinModel<f64>, theta_true: Vec<f64>, dir: &Path) -> Result<ExitCode, Failure> {
    let design = Arc::new(cfg.build_design()?);
    let noise = NoiseModel::new(cfg.noise.sigma)?;
    let grid = default_convergence_grid(cfg.convergence.max_samples);
    let trace = mc_convergence_trace(
        model,
        &design,
        &noise,
        &theta_true,
        &cfg.convergence.probe,
        &grid,
        cfg.seed,
        cfg.estimators.sequence,
        &solver(cfg, theta_true.clone())?,
    )?;
    write_convergence_csv(&trace, create(&dir.join("convergence.csv"))?)?;
    if let Some((n, v)) = trace.last() {
        println!("V^MC at {n} samples: {v:.6e}");
    }
    Ok(ExitCode::SUCCESS)
}
