//! End-to-end tests of the `randx` binary: subcommand behavior, exit codes,
//! report formats, and determinism.

use std::io::Write;
use std::process::{Command, Output};

use tempfile::NamedTempFile;

fn randx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_randx"))
        .args(args)
        .env_remove("RANDX_NSW_URL")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn toy_csv() -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    write!(f, "y,w,x\n3.0,1,1.0\n5.0,1,2.0\n1.0,0,0.0\n1.0,0,1.0\n").unwrap();
    f
}

#[test]
fn fit_regression_on_toy_fixture_gives_point_two() {
    let f = toy_csv();
    let out = randx(&[
        "fit",
        "--method",
        "reg",
        "--csv",
        f.path().to_str().unwrap(),
        "--response",
        "y",
        "--treatment",
        "w",
        "--covariates",
        "x",
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["method"], "regression");
    assert!((v["point"].as_f64().unwrap() - 2.0).abs() < 1e-10);
    assert_eq!(v["n_t"], 2);
    assert_eq!(v["n_c"], 2);
}

#[test]
fn fit_diff_means_csv_format() {
    let f = toy_csv();
    let out = randx(&[
        "fit",
        "--method",
        "diff",
        "--csv",
        f.path().to_str().unwrap(),
        "--response",
        "y",
        "--treatment",
        "w",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.trim().lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("method,point,se"));
    assert!(lines[1].starts_with("diff_means,3,"));
}

#[test]
fn oracle_gap_scalar_fixture() {
    let out = randx(&[
        "oracle", "gap", "--beta-t", "2", "--beta-c", "1", "--n-t", "100", "--n-c", "100",
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["quantity"], "variance_gap");
    assert!((v["value"].as_f64().unwrap() - 0.045).abs() < 1e-12);
    assert!((v["details"]["var_diff"].as_f64().unwrap() - 0.07).abs() < 1e-12);
    assert!((v["details"]["var_regression"].as_f64().unwrap() - 0.025).abs() < 1e-12);
}

#[test]
fn oracle_r2_threshold() {
    let out = randx(&["oracle", "r2-threshold", "--n", "9", "--p", "1"]);
    let v = stdout_json(&out);
    assert!((v["value"].as_f64().unwrap() - 0.3).abs() < 1e-12);
}

#[test]
fn simulate_emits_seed_and_is_deterministic() {
    let args = [
        "simulate", "--paper", "--reps", "50", "--seed", "7", "--nt", "40", "--nc", "40",
    ];
    let a = randx(&args);
    let b = randx(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout, "same seed must give identical bytes");
    let v = stdout_json(&a);
    assert_eq!(v["seed"], 7);
    assert!(v["estimators"]["diff_means"]["coverage"].is_number());

    // seed omitted: one is generated and reported
    let c = randx(&[
        "simulate", "--reps", "10", "--nt", "30", "--nc", "30",
    ]);
    let v = stdout_json(&c);
    assert!(v["seed"].as_u64().is_some());
}

#[test]
fn sweep_emits_tidy_csv() {
    let out = randx(&[
        "sweep",
        "--noise-grid",
        "2.0,6.0",
        "--reps",
        "40",
        "--seed",
        "3",
        "--nt",
        "50",
        "--nc",
        "50",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.trim().lines().collect();
    assert_eq!(lines[0], "noise,mean_r2,se_ratio");
    assert_eq!(lines.len(), 3);
    for line in &lines[1..] {
        assert_eq!(line.split(',').count(), 3);
    }
}

#[test]
fn bootstrap_reports_percentile_interval() {
    let f = toy_csv();
    let out = randx(&[
        "bootstrap",
        "--method",
        "diff",
        "--csv",
        f.path().to_str().unwrap(),
        "--response",
        "y",
        "--treatment",
        "w",
        "--replicates",
        "200",
        "--seed",
        "11",
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["provenance"]["seed"], 11);
    assert!(v["ci_low"].as_f64().unwrap() <= v["ci_high"].as_f64().unwrap());
}

#[test]
fn nsw_demo_reproduces_bundled_statistics() {
    let out = randx(&["nsw-demo"]);
    let v = stdout_json(&out);
    assert!((v["diff_means"]["point"].as_f64().unwrap() - 4709.4).abs() < 0.1);
    assert!((v["regression"]["point"].as_f64().unwrap() - 4435.2).abs() < 45.0);
    assert!((v["combined_r_squared"].as_f64().unwrap() - 0.24).abs() < 0.01);
}

#[test]
fn usage_errors_exit_one_with_error_object() {
    // unknown flag
    let out = randx(&["fit", "--definitely-not-a-flag"]);
    assert_eq!(out.status.code(), Some(1));

    // contradictory method/column combination
    let f = toy_csv();
    let out = randx(&[
        "fit",
        "--method",
        "reg",
        "--csv",
        f.path().to_str().unwrap(),
        "--response",
        "y",
        "--treatment",
        "w",
        "--stratum",
        "x",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["category"], "usage");
}

#[test]
fn data_errors_exit_two_with_error_object() {
    let mut f = NamedTempFile::new().unwrap();
    write!(f, "y,w,x\n3.0,2,1.0\n1.0,0,0.0\n").unwrap();
    let out = randx(&[
        "fit",
        "--method",
        "diff",
        "--csv",
        f.path().to_str().unwrap(),
        "--response",
        "y",
        "--treatment",
        "w",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["category"], "data");
    assert!(err["error"]["message"]
        .as_str()
        .unwrap()
        .contains("row 1"));
}

#[test]
fn numeric_errors_exit_two() {
    // duplicate covariate column makes the design rank-deficient
    let mut f = NamedTempFile::new().unwrap();
    write!(
        f,
        "y,w,x,z\n3.0,1,1.0,1.0\n5.0,1,2.0,2.0\n4.0,1,3.0,3.0\n1.0,0,0.0,0.0\n2.0,0,1.0,1.0\n0.0,0,2.0,2.0\n"
    )
    .unwrap();
    let out = randx(&[
        "fit",
        "--method",
        "reg",
        "--csv",
        f.path().to_str().unwrap(),
        "--response",
        "y",
        "--treatment",
        "w",
        "--covariates",
        "x,z",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["category"], "numeric");
    assert!(err["error"]["message"].as_str().unwrap().contains("z"));
}

#[test]
fn fit_post_stratified_from_csv() {
    let mut f = NamedTempFile::new().unwrap();
    // stratum a (4 units): T̄=2, C̄=1; stratum b (6 units): T̄=6, C̄=3
    write!(
        f,
        "y,w,g\n2,1,a\n2,1,a\n1,0,a\n1,0,a\n6,1,b\n6,1,b\n6,1,b\n3,0,b\n3,0,b\n3,0,b\n"
    )
    .unwrap();
    let out = randx(&[
        "fit",
        "--method",
        "post-stratified",
        "--csv",
        f.path().to_str().unwrap(),
        "--response",
        "y",
        "--treatment",
        "w",
        "--stratum",
        "g",
    ]);
    let v = stdout_json(&out);
    assert!((v["point"].as_f64().unwrap() - 2.2).abs() < 1e-12);
}

#[test]
fn fit_known_mean_and_ipw() {
    let f = toy_csv();
    let out = randx(&[
        "fit",
        "--method",
        "known-mean",
        "--csv",
        f.path().to_str().unwrap(),
        "--response",
        "y",
        "--treatment",
        "w",
        "--covariates",
        "x",
        "--mu",
        "1.0",
    ]);
    let v = stdout_json(&out);
    assert!((v["point"].as_f64().unwrap() - 2.0).abs() < 1e-10);

    let out = randx(&[
        "fit",
        "--method",
        "ipw",
        "--csv",
        f.path().to_str().unwrap(),
        "--response",
        "y",
        "--treatment",
        "w",
        "--covariates",
        "x",
        "--pi",
        "0.5",
    ]);
    let v = stdout_json(&out);
    assert!((v["point"].as_f64().unwrap() - 4.0).abs() < 1e-10);

    // ipw without a propensity source is a usage error
    let out = randx(&[
        "fit",
        "--method",
        "ipw",
        "--csv",
        f.path().to_str().unwrap(),
        "--response",
        "y",
        "--treatment",
        "w",
        "--covariates",
        "x",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fit_weighted_contrast_modes() {
    let f = toy_csv();
    let literal = randx(&[
        "fit",
        "--method",
        "weighted",
        "--csv",
        f.path().to_str().unwrap(),
        "--response",
        "y",
        "--treatment",
        "w",
        "--pi",
        "0.5",
    ]);
    let v = stdout_json(&literal);
    assert!((v["point"].as_f64().unwrap() - 6.0).abs() < 1e-12);
    assert!(v["se"].is_null());

    let hajek = randx(&[
        "fit",
        "--method",
        "weighted",
        "--csv",
        f.path().to_str().unwrap(),
        "--response",
        "y",
        "--treatment",
        "w",
        "--pi",
        "0.5",
        "--hajek",
    ]);
    let v = stdout_json(&hajek);
    assert!((v["point"].as_f64().unwrap() - 3.0).abs() < 1e-12);
}

#[test]
fn nsw_demo_rejects_fetch_without_url() {
    let out = randx(&["nsw-demo", "--fetch"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"]["message"]
        .as_str()
        .unwrap()
        .contains("RANDX_NSW_URL"));
}
