//! End-to-end tests of the `mbm` binary: exit codes, JSON shapes, artifact
//! round-trips, and seed plumbing.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mbm"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json_of(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout should be JSON: {e}\nstdout: {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            stderr_of(out)
        )
    })
}

const BROWNIAN: &str = r#"
case_tag = "thm2_iii"

[hurst]
variant = "constant"
h = 0.5

[interval]
t1 = 1.0
t2 = 2.0

[study]
u_list = [3.2, 4.3]
grid_n = 128
reps = 1500
seed = 7

[[constants.fixed]]
kind = "piterbarg_one_sided"
alpha = 1.0
a = 1.0
value = 2.0
"#;

const LOG_PROFILE: &str = r#"
case_tag = "thm2_i"

[hurst]
variant = "log_reciprocal"

[interval]
t1 = 4.0
t2 = 9.0

# The log-scale case always multiplies by the window constant at
# alpha = 2/ln(T2); pin it so `tail` needs no simulation.
[[constants.fixed]]
kind = "pickands"
alpha = 0.9102392266268373
value = 0.95
"#;

#[test]
fn covariance_reports_exact_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.toml", BROWNIAN);
    let out = run(&["covariance", "--config", cfg.to_str().unwrap(), "--s", "1", "--t", "2"]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let v = json_of(&out);
    assert_eq!(v["h_s"].as_f64().unwrap(), 0.5);
    assert_eq!(v["d_kernel"].as_f64().unwrap(), 0.5);
    // Brownian motion: Cov(1,2) = min(1,2) = 1, corr = 1/√2.
    assert_eq!(v["autocov"].as_f64().unwrap(), 1.0);
    let corr = v["correlation"].as_f64().unwrap();
    assert!((corr - 0.5f64.sqrt()).abs() < 1e-15);
    assert!((v["sigma_t"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn missing_config_flag_is_a_usage_error() {
    let out = run(&["covariance", "--s", "1", "--t", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("--config"));
}

#[test]
fn missing_config_file_names_the_path() {
    let out = run(&["covariance", "--config", "/nonexistent/nope.toml", "--s", "1", "--t", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("nope.toml"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cfg.toml",
        &BROWNIAN.replace("case_tag = \"thm2_iii\"", "case_tag = \"thm2_iii\"\ntypo_field = true"),
    );
    let out = run(&["covariance", "--config", cfg.to_str().unwrap(), "--s", "1", "--t", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("typo_field"));
}

#[test]
fn time_outside_interval_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.toml", BROWNIAN);
    let out = run(&["covariance", "--config", cfg.to_str().unwrap(), "--s", "0.5", "--t", "5"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn case_needs_its_matching_profile() {
    let dir = tempfile::tempdir().unwrap();
    // The log-scale analysis case with a constant profile is contradictory;
    // that is a configuration error and the message names both sides.
    let cfg = write_config(
        dir.path(),
        "cfg.toml",
        &LOG_PROFILE.replace("variant = \"log_reciprocal\"", "variant = \"constant\"\nh = 0.5"),
    );
    let out = run(&["tail", "--config", cfg.to_str().unwrap(), "--u", "30"]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_of(&out));
    let err = stderr_of(&out);
    assert!(err.contains("thm2_i") && err.contains("constant"), "stderr: {err}");
}

#[test]
fn tail_normalizes_by_the_critical_scale() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.toml", LOG_PROFILE);
    let out = run(&["tail", "--config", cfg.to_str().unwrap(), "--u", "30"]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let v = json_of(&out);
    // σ ≡ e for the reciprocal-log profile, so μ = u/e.
    let mu = v["mu"].as_f64().unwrap();
    let want = 30.0 / std::f64::consts::E;
    assert!((mu - want).abs() < 1e-12 * want);
    assert!(v["value"].as_f64().unwrap() > 0.0);
    assert!(v["regime"].is_string());
}

#[test]
fn verify_artifacts_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.toml", BROWNIAN);
    let out1 = dir.path().join("out1");
    let out2 = dir.path().join("out2");
    let out3 = dir.path().join("out3");

    let r1 = run(&["verify", "--config", cfg.to_str().unwrap(), "--out", out1.to_str().unwrap()]);
    assert!(r1.status.success(), "stderr: {}", stderr_of(&r1));
    let r2 = run(&["verify", "--config", cfg.to_str().unwrap(), "--out", out2.to_str().unwrap()]);
    assert!(r2.status.success());

    let csv1 = fs::read(out1.join("verify.csv")).unwrap();
    assert_eq!(csv1, fs::read(out2.join("verify.csv")).unwrap());
    assert_eq!(
        fs::read(out1.join("verify.json")).unwrap(),
        fs::read(out2.join("verify.json")).unwrap()
    );

    // The manifest written next to the artifacts is itself a loadable
    // config that reproduces the run byte for byte.
    let manifest = out1.join("manifest.json");
    let r3 = run(&["verify", "--config", manifest.to_str().unwrap(), "--out", out3.to_str().unwrap()]);
    assert!(r3.status.success(), "stderr: {}", stderr_of(&r3));
    assert_eq!(csv1, fs::read(out3.join("verify.csv")).unwrap());

    let header = String::from_utf8(csv1).unwrap();
    assert!(header.starts_with("u,mu,p_hat,stderr,p_asymptotic,ratio,regime\n"));
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.toml", BROWNIAN);
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    let r1 = run(&["verify", "--config", cfg.to_str().unwrap(), "--out", out1.to_str().unwrap()]);
    let r2 = run(&[
        "verify", "--config", cfg.to_str().unwrap(), "--out", out2.to_str().unwrap(),
        "--seed", "8",
    ]);
    assert!(r1.status.success() && r2.status.success());
    assert_ne!(
        fs::read(out1.join("verify.csv")).unwrap(),
        fs::read(out2.join("verify.csv")).unwrap(),
        "a different seed must change the Monte Carlo table"
    );
    // The reseeded manifest records the override.
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(out2.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["study"]["seed"].as_u64(), Some(8));
}

#[test]
fn refine_emits_the_extrapolation_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cfg.toml",
        &BROWNIAN
            .replace("u_list = [3.2, 4.3]", "u_list = [3.2]")
            .replace("grid_n = 128", "grid_n_list = [64, 128]")
            .replace("reps = 1500", "reps = 800"),
    );
    let out_dir = dir.path().join("out");
    let r = run(&["refine", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(r.status.success(), "stderr: {}", stderr_of(&r));
    let csv = fs::read_to_string(out_dir.join("refine.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "u,grid_n,p_hat,stderr,exceed_count,extrapolated,extrapolated_stderr"
    );
    assert_eq!(lines.len(), 3, "one row per grid level:\n{csv}");
}

#[test]
fn constants_respect_fixed_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cfg.toml",
        r#"
case_tag = "thm2_iii"

[hurst]
variant = "constant"
h = 0.5

[interval]
t1 = 1.0
t2 = 2.0

[constants]
alphas = [1.0]
kinds = ["pickands"]

[[constants.fixed]]
kind = "pickands"
alpha = 1.0
value = 1.0
"#,
    );
    let out_dir = dir.path().join("out");
    let r = run(&["constants", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(r.status.success(), "stderr: {}", stderr_of(&r));
    let rec: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("pickands_alpha1.json")).unwrap()).unwrap();
    assert_eq!(rec["source"].as_str(), Some("fixed_override"));
    assert_eq!(rec["value"].as_f64(), Some(1.0));
}
