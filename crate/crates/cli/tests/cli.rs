use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stokes-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn stokes-lab")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("stokes-lab-{}-{name}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

const SPECTRUM: &[&str] = &["--experiment", "spectrum", "--level", "2", "--beta", "1"];

#[test]
fn spectrum_csv_lands_on_stdout() {
    let out = run(SPECTRUM);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "level,h,beta,gamma_u,gamma_p,d_h,d_tilde,ratio"
    );
    let row = lines.next().unwrap();
    assert!(row.starts_with("2,0.25,1,1,0,"), "row: {row}");
    assert_eq!(lines.next(), None);
    let d_h: f64 = row.split(',').nth(5).unwrap().parse().unwrap();
    assert!((d_h - 1.0274e-4).abs() <= 0.1 * 1.0274e-4, "d_h = {d_h}");
}

#[test]
fn reruns_are_byte_identical() {
    let a = run(SPECTRUM);
    let b = run(SPECTRUM);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(a.stderr.is_empty());
}

#[test]
fn json_output_carries_schema_and_config() {
    let mut args = SPECTRUM.to_vec();
    args.extend(["--format", "json"]);
    let out = run(&args);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["experiment"], "spectrum");
    assert_eq!(v["all_ok"], true);
    assert_eq!(v["config"]["level"], 2);
    assert_eq!(v["rows"].as_array().unwrap().len(), 1);
}

#[test]
fn out_flag_redirects_the_report() {
    let dir = scratch("out");
    let path = dir.join("spectrum.csv");
    let mut args = SPECTRUM.to_vec();
    let path_s = path.to_str().unwrap();
    args.extend(["--out", path_s]);
    let out = run(&args);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let on_disk = fs::read(&path).unwrap();
    assert_eq!(on_disk, run(SPECTRUM).stdout);
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn config_file_loads_and_flags_override_it() {
    let dir = scratch("config");
    let path = dir.join("exp.toml");
    fs::write(&path, "experiment = \"spectrum\"\nlevel = 3\nbeta = [1.0]\n").unwrap();
    let path_s = path.to_str().unwrap();

    let from_file = run(&["--config", path_s]);
    assert!(from_file.status.success());
    let text = String::from_utf8(from_file.stdout).unwrap();
    assert!(text.lines().nth(2).unwrap().starts_with("3,0.125,1,"));

    let overridden = run(&["--config", path_s, "--level", "2"]);
    assert!(overridden.status.success());
    let text = String::from_utf8(overridden.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("2,0.25,1,"));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn missing_experiment_is_a_config_error() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error:"), "stderr: {err}");
    assert!(err.contains("--experiment") || err.contains("--config"));
}

#[test]
fn out_of_range_level_is_rejected() {
    let out = run(&["--experiment", "spectrum", "--level", "9"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("level"));
}

#[test]
fn unknown_experiment_is_rejected() {
    let out = run(&["--experiment", "eigenhunt"]);
    assert_eq!(out.status.code(), Some(2));
}
