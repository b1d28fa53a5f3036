use std::path::Path;
use std::process::{Command, Output};

fn udw(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_udw"));
    cmd.args(args).env_remove("UDW_WORKERS");
    if let Some(w) = workers {
        cmd.env("UDW_WORKERS", w);
    }
    cmd.output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn config_file_rate_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "rate.ini",
        "# inertial Gaussian detector\n[model]\nspacetime = 3+1\nmass = 1\n[profile]\nkind = double_gaussian\nsigma = 1\nlambda = 5\n[sweep]\nstart = -6\nstop = 0\npoints = 7\n",
    );
    let out = udw(&["rate", "--config", &cfg], None);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("delta,rate,est_error,path,converged"));
    assert_eq!(lines.count(), 7);
}

#[test]
fn invalid_config_exits_one_and_lists_every_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.ini", "[model]\nspacetime = 1+1\nmass = 2\ncolour = blue\n[sweep]\npoints = 1\n");
    let out = udw(&["rate", "--config", &cfg], None);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");
    assert!(err.contains("line 4"), "{err}");
    assert!(err.contains("points"), "{err}");
}

#[test]
fn subcommand_must_match_quantity() {
    let out = udw(&["window", "--preset", "fig4"], None);
    assert_eq!(out.status.code(), Some(1));
    let out = udw(&["figure", "fig9"], None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn failed_points_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "num.ini", "[run]\nmethod = numeric\n[model]\nspacetime = 1+1\n[sweep]\nstart = -2\nstop = -1\npoints = 2\n");
    let out = udw(&["rate", "--config", &cfg], None);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("NaN"));
}

#[test]
fn json_output_mirrors_csv() {
    let csv = udw(&["window", "--preset", "fig1"], None);
    let json = udw(&["window", "--preset", "fig1", "--format", "json"], Some("2"));
    assert_eq!(json.status.code(), Some(0));
    let records: Vec<serde_json::Value> = serde_json::from_slice(&json.stdout).unwrap();
    let csv_text = String::from_utf8(csv.stdout).unwrap();
    assert_eq!(records.len(), csv_text.lines().count() - 1);
    let first: Vec<&str> = csv_text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(records[0]["k"].as_f64().unwrap(), first[0].parse::<f64>().unwrap());
    assert_eq!(records[0]["rate"].as_f64().unwrap(), first[1].parse::<f64>().unwrap());
}

#[test]
fn workers_env_does_not_change_output() {
    let a = udw(&["figure", "fig7"], Some("1"));
    let b = udw(&["figure", "fig7", "--workers", "3"], None);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn kms_check_rows_pass() {
    let out = udw(&["kms-check", "--preset", "fig6"], None);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with("true")));
}

#[test]
fn fit_hermite_reports_reference() {
    let out = udw(&["fit-hermite", "--n", "0", "--m", "3", "--format", "json"], None);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["lambda"].as_f64().unwrap() - 2.5).abs() < 0.05);
    assert_eq!(v["reference_sigma"].as_f64().unwrap(), 1.0);
}

#[test]
fn tol_flag_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.csv");
    let out = udw(&["window", "--tol", "1e-10", "--out", path.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("k,rate"));
    let out = udw(&["window", "--tol", "-1"], None);
    assert_eq!(out.status.code(), Some(1));
}
