mod common;

use common::{scratch_dir, small_config_toml};
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_qdsim");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("config.toml");
    let text = format!(
        "{}\n[output]\ndir = \"{}\"\n{extra}",
        small_config_toml(),
        dir.join("out").display()
    );
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn unknown_config_key_exits_2_and_names_it() {
    let dir = scratch_dir("cli_bad_key");
    let path = dir.join("bad.toml");
    std::fs::write(&path, "voltage_topp = 0.5\n").unwrap();
    let out = run(&["solve", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("voltage_topp"), "stderr: {stderr}");
}

#[test]
fn missing_config_file_exits_2() {
    let out = run(&["solve", "--config", "/nonexistent/nowhere.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_output_is_deterministic() {
    let dir = scratch_dir("cli_solve_det");
    let cfg = write_config(&dir, "");
    let args = ["solve", "--config", cfg.as_str(), "--v-left", "0.25"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8_lossy(&a.stdout);
    assert!(text.contains("\"fss_ueV\""));
    assert!(text.contains("\"v_left_V\": 2.50000000e-1"));
}

#[test]
fn sweep_writes_one_csv_row_per_point() {
    let dir = scratch_dir("cli_sweep_rows");
    let cfg = write_config(
        &dir,
        "[sweep]\nv_min = -0.1\nv_max = 0.1\nn_points = 2\n",
    );
    let out = run(&["sweep", "--config", cfg.as_str(), "--mode", "quadrupole"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("out/sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("v_V,fss_ueV,beta"));
    assert!(lines[1].starts_with("-1.00000000e-1,"));
    assert!(lines[2].starts_with("1.00000000e-1,"));
}

#[test]
fn sweep_csv_is_worker_count_independent() {
    let dir1 = scratch_dir("cli_sweep_w1");
    let dir2 = scratch_dir("cli_sweep_w2");
    let sweep = "[sweep]\nv_min = -0.1\nv_max = 0.1\nn_points = 3\n";
    let cfg1 = write_config(&dir1, sweep);
    let cfg2 = {
        // Same run with a two-thread pool instead of the sequential path.
        let path = dir2.join("config.toml");
        let text = format!(
            "{}\n[output]\ndir = \"{}\"\n{sweep}",
            small_config_toml().replace("workers = 1", "workers = 2"),
            dir2.join("out").display()
        );
        std::fs::write(&path, text).unwrap();
        path.to_string_lossy().into_owned()
    };
    let a = run(&["sweep", "--config", cfg1.as_str(), "--mode", "quadrupole"]);
    let b = run(&["sweep", "--config", cfg2.as_str(), "--mode", "quadrupole"]);
    assert!(a.status.success() && b.status.success());
    let csv1 = std::fs::read(dir1.join("out/sweep.csv")).unwrap();
    let csv2 = std::fs::read(dir2.join("out/sweep.csv")).unwrap();
    assert_eq!(csv1, csv2);
}

#[test]
fn export_fields_zero_bias_potential_is_zero() {
    let dir = scratch_dir("cli_export_zero");
    let cfg = write_config(&dir, "");
    let out = run(&["export-fields", "--config", cfg.as_str(), "--what", "potential"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x_nm,y_nm,phi_V");
    for line in lines {
        let phi: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(phi, 0.0, "nonzero potential in {line}");
    }
}

#[test]
fn optimize_with_exhausted_budget_reports_not_converged() {
    let dir = scratch_dir("cli_opt_budget");
    let cfg = write_config(
        &dir,
        "[optimize]\nmax_evals = 3\nmax_restarts = 0\nv_start = 0.1\nv_min = 0.0\nv_max = 0.3\n",
    );
    let out = run(&["optimize", "--config", cfg.as_str()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("\"converged\": false"), "{text}");
    let trace = std::fs::read_to_string(dir.join("out/trace.csv")).unwrap();
    // Header plus the initial simplex; the budget stops anything further.
    assert!(trace.lines().count() <= 5, "{trace}");
}
