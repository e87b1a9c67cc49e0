use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn predunc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_predunc")).args(args).output().expect("running predunc")
}

fn run_dir(output: &Output) -> PathBuf {
    let stdout = String::from_utf8_lossy(&output.stdout);
    let line = stdout
        .lines()
        .find_map(|l| l.strip_prefix("run directory: "))
        .unwrap_or_else(|| panic!("no run directory in {stdout}"));
    PathBuf::from(line)
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn dump_config_prints_resolved_toml() {
    let out = predunc(&["benchmark", "--model", "nrtl", "--sigma", "0.05", "--dump-config"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let value: toml::Value = toml::from_str(&text).unwrap();
    assert_eq!(value["model"]["type"].as_str(), Some("nrtl"));
    assert_eq!(value["noise"]["sigma"].as_float(), Some(0.05));
    assert_eq!(value["design"]["name"].as_str(), Some("factorial"));
}

#[test]
fn configuration_errors_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(predunc(&["benchmark", "--model", "cubic"]).status.code(), Some(2));
    assert_eq!(predunc(&["benchmark", "--sigma", "-1", "--dump-config"]).status.code(), Some(2));
    let cfg = write_config(tmp.path(), "[estimators]\nunknown_key = 1\n");
    assert_eq!(predunc(&["benchmark", "--config", &cfg]).status.code(), Some(2));
    let cfg = write_config(tmp.path(), "[grid]\nbounds = [[-1.0, 1.0]]\n");
    assert_eq!(predunc(&["validate-quadratic", "--config", &cfg]).status.code(), Some(2));
    let out = tmp.path().to_str().unwrap();
    assert_eq!(predunc(&["validate-quadratic", "--model", "exp", "--out", out]).status.code(), Some(2));
}

#[test]
fn validate_quadratic_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[grid]\npoints_per_dim = 12\n");
    let out = predunc(&["validate-quadratic", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = run_dir(&out);
    assert!(dir.join("resolved-config").is_file());
    assert_eq!(header(&dir.join("validation.csv")), "x1,x2,v_exact,delta_lin,delta_sp,delta_ms,delta_ld");
    let rows = fs::read_to_string(dir.join("validation.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 144);
    let stats: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("stats.json")).unwrap()).unwrap();
    assert!(stats["LD"]["mean"].as_f64().unwrap() <= 1e-9);
    assert!(stats["LIN"]["p50"].is_number());
}

#[test]
fn failing_exactness_bound_exits_with_code_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[grid]\npoints_per_dim = 5\n[validation]\nexactness_bound = 1e-30\n");
    let out = predunc(&["validate-quadratic", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn benchmark_and_convergence_write_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "seed = 7\n[estimators]\nn_mc = 2000\nn_eval_samples = 10\nmethods = [\"LIN\", \"LD\"]\n[grid]\npoints_per_dim = 20\n[convergence]\nmax_samples = 3000\n",
    );
    let out_dir = tmp.path().to_str().unwrap();
    let out = predunc(&["benchmark", "--config", &cfg, "--model", "exp", "--out", out_dir]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = run_dir(&out);
    assert!(dir.file_name().unwrap().to_str().unwrap().ends_with("-seed7"));
    assert_eq!(header(&dir.join("results.csv")), "sample_index,param_error,rms_lin,rms_sp,rms_ms,rms_ld");
    let first = fs::read_to_string(dir.join("results.csv")).unwrap().lines().nth(1).unwrap().to_string();
    let cells: Vec<&str> = first.split(',').collect();
    assert_eq!(cells.len(), 6);
    assert!(cells[3].is_empty() && cells[4].is_empty() && !cells[5].is_empty());
    assert_eq!(header(&dir.join("reference.csv")), "x1,v_mc");
    let stats: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("stats.json")).unwrap()).unwrap();
    let keys: Vec<&String> = stats.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["LD", "LIN", "param_error"]);

    let out = predunc(&["mc-convergence", "--config", &cfg, "--out", out_dir]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = run_dir(&out);
    let text = fs::read_to_string(dir.join("convergence.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("n_samples,v_mc"));
    let last: usize = text.lines().last().unwrap().split(',').next().unwrap().parse().unwrap();
    assert_eq!(last, 3000);
}

#[test]
fn repeated_runs_get_distinct_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[grid]\npoints_per_dim = 3\n");
    let out_dir = tmp.path().to_str().unwrap();
    let a = run_dir(&predunc(&["validate-quadratic", "--config", &cfg, "--out", out_dir]));
    let b = run_dir(&predunc(&["validate-quadratic", "--config", &cfg, "--out", out_dir]));
    assert_ne!(a, b);
    assert_eq!(fs::read(a.join("validation.csv")).unwrap(), fs::read(b.join("validation.csv")).unwrap());
}
