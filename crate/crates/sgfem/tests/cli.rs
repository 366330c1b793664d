//! End-to-end tests of the `sgfem` binary: exit codes, file outputs, error
//! reporting, and byte-level determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgfem"))
        .args(args)
        .env("SGFEM_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sgfem-cli-{tag}"));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn help_exits_cleanly() {
    let out = run(&["--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("convergence"));
}

#[test]
fn unknown_command_is_a_usage_error() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_profile_run() {
    let dir = temp_dir("solve");
    let out = run(&[
        "solve",
        "--output-dir",
        dir.to_str().unwrap(),
        "--mesh-sizes",
        "100",
        "--orders",
        "1",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.join("solution.csv")).unwrap();
    assert!(csv.lines().count() > 1000);
    assert!(csv.starts_with("x,u_h,u_ref\n"));
    let report = std::fs::read_to_string(dir.join("report.txt")).unwrap();
    assert!(report.contains("iterations="));
    assert!(report.contains("final_residual_inf="));
    assert!(report.contains("condition_estimate="));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn interface_on_node_exits_2_with_code_on_stderr() {
    let out = run(&["solve", "--mesh-sizes", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("InterfaceOnNode"), "stderr: {stderr}");
}

#[test]
fn negative_custom_coefficient_exits_2() {
    let out = run(&[
        "solve",
        "--problem",
        "custom",
        "--kappa",
        "1,-2",
        "--interfaces",
        "0.5",
        "--mesh-sizes",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("NonpositiveCoefficient"));
}

#[test]
fn convergence_run_with_config_file() {
    let dir = temp_dir("conv");
    let config_path = dir.join("study.cfg");
    std::fs::write(
        &config_path,
        "# tiny study\nproblem=example1\nmethod=both\norders=1\nmesh-sizes=10,20,40\n",
    )
    .unwrap();
    let out = run(&[
        "convergence",
        "--config",
        config_path.to_str().unwrap(),
        "--output-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rates = std::fs::read_to_string(dir.join("rates.csv")).unwrap();
    assert!(rates.starts_with("method,p,N,h,err_l2,err_h1,slope_l2,slope_h1\n"));
    assert_eq!(rates.lines().count(), 1 + 2 * 3); // two methods, three sizes
    let svg = std::fs::read_to_string(dir.join("h1.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(std::fs::metadata(dir.join("l2.svg")).unwrap().len() < 2_000_000);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn convergence_with_two_sizes_exits_2() {
    let out = run(&["convergence", "--mesh-sizes", "10,20"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("InsufficientData"));
}

#[test]
fn csv_output_is_deterministic() {
    let dir_a = temp_dir("det-a");
    let dir_b = temp_dir("det-b");
    for dir in [&dir_a, &dir_b] {
        let out = run(&[
            "convergence",
            "--output-dir",
            dir.to_str().unwrap(),
            "--problem",
            "example2",
            "--orders",
            "1,2",
            "--mesh-sizes",
            "10,20,40",
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    let a = std::fs::read(dir_a.join("rates.csv")).unwrap();
    let b = std::fs::read(dir_b.join("rates.csv")).unwrap();
    assert_eq!(a, b);
    std::fs::remove_dir_all(&dir_a).ok();
    std::fs::remove_dir_all(&dir_b).ok();
}

#[test]
fn conservation_run_outputs() {
    let dir = temp_dir("cons");
    let out = run(&[
        "conservation",
        "--output-dir",
        dir.to_str().unwrap(),
        "--problem",
        "example2",
        "--constrained",
        "true",
        "--orders",
        "2",
        "--mesh-sizes",
        "10,20,40",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for file in [
        "lce.csv",
        "lce_mean.csv",
        "rates_lc.csv",
        "lce_mean.svg",
        "rates_lc.svg",
    ] {
        assert!(dir.join(file).exists(), "{file} missing");
    }
    // constrained column of lce.csv at machine precision
    let lce = std::fs::read_to_string(dir.join("lce.csv")).unwrap();
    for line in lce.lines().skip(1) {
        let constrained: f64 = line.split(',').nth(6).unwrap().parse().unwrap();
        assert!(constrained.abs() <= 1e-12);
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn interp_study_outputs() {
    let dir = temp_dir("interp");
    let out = run(&[
        "interp-study",
        "--output-dir",
        dir.to_str().unwrap(),
        "--orders",
        "1,2",
        "--mesh-sizes",
        "10,20,40",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.join("interp_rates.csv")).unwrap();
    assert!(csv.starts_with("p,N,h,std_h1,enr_h1,std_w16,enr_w16"));
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
    std::fs::remove_dir_all(&dir).ok();
}
