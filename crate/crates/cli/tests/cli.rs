use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lgs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lgs")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn small_config(dir: &Path, steps: u64, snapshot_every: u64) -> std::path::PathBuf {
    let p = dir.join("small.cfg");
    let text = format!(
        "[domain]\nsize = 8 8 8\ngravity = 0 0 -1e-5\n\n[boundary]\nx = periodic\ny = periodic\n\n\
         [fill]\nmode = basin\nlevel = 4\n\n[run]\nsteps = {steps}\noutput_every = 10\n\
         snapshot_every = {snapshot_every}\noutput_dir = {}\n",
        dir.join("out").display()
    );
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn oracle_prints_scribanti_curve() {
    let out = lgs(&["oracle", "cuboid", "--b", "24", "--h", "16", "--l", "32", "--rho-s", "0.5", "--g", "1e-4", "--alpha-max", "10", "--step", "5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "alpha_deg,b0m,gm,moment");
    assert_eq!(lines.len(), 4);
    let upright: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
    // I/V = b^2 / (12 d) = 6, KG - KB = 4
    assert_eq!(upright, vec![0.0, 6.0, 2.0, 0.0]);
}

#[test]
fn oracle_rejects_bad_geometry() {
    let out = lgs(&["oracle", "cuboid", "--b=-1", "--h", "16", "--l", "32", "--rho-s", "0.5", "--g", "1e-4"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn check_echoes_canonical_config() {
    let dir = tempfile::tempdir().unwrap();
    let p = small_config(dir.path(), 0, 0);
    let out = lgs(&["check", p.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("size = 8 8 8"));
}

#[test]
fn config_error_exits_one_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.cfg");
    fs::write(&p, "[domain]\nsize = 8 8 8\nwobble = 3\n").unwrap();
    let out = lgs(&["check", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn run_writes_echo_csv_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let p = small_config(dir.path(), 25, 10);
    let out = lgs(&["run", p.to_str().unwrap(), "--serial"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("out");
    assert!(o.join("config.echo").exists());
    let csv = fs::read_to_string(o.join("diagnostics.csv")).unwrap();
    let steps: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(steps, ["0", "10", "20", "25"]);
    for s in [0, 10, 20] {
        assert!(o.join(format!("snapshot_{s:08}.vtk")).exists());
    }
    assert!(!o.join("snapshot_00000025.vtk").exists());
}

#[test]
fn zero_step_run_writes_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let p = small_config(dir.path(), 0, 0);
    let out = lgs(&["run", p.to_str().unwrap(), "--steps", "0"]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("out/diagnostics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}
