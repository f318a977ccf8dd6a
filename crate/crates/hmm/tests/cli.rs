//! End-to-end tests of the command-line contract: subcommands, exit codes
//! and artifact layout, exercised through the installed binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hmm"))
}

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hmm-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(path: &Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn run_five_spot_writes_artifacts() {
    let dir = scratch_dir("run");
    let config = dir.join("run.conf");
    write(
        &config,
        "scenario.preset = five_spot\nmesh.nx = 8\nmesh.ny = 8\ntime.steps = 5\noutput.field_stride = 5\n",
    );
    let out = bin().arg("run").arg(&config).output().unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    for artifact in ["run_log.csv", "mass_ledger.csv", "energy.csv", "fields_00000.vtk", "fields_00005.vtk"] {
        assert!(dir.join("out").join(artifact).is_file(), "missing {artifact}");
    }
    let log = std::fs::read_to_string(dir.join("out/run_log.csv")).unwrap();
    assert!(log.starts_with("# hmm "));
    assert!(log.contains("# config: scenario.preset = five_spot"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn missing_mesh_file_is_an_input_error() {
    let dir = scratch_dir("missing-mesh");
    let config = dir.join("run.conf");
    write(&config, "mesh.kind = file\nmesh.path = nowhere.mesh\n");
    let out = bin().arg("run").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("mesh file not found"), "stderr: {}", stderr(&out));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn incompatible_wells_are_a_model_error() {
    let dir = scratch_dir("incompatible");
    let config = dir.join("run.conf");
    // injection with no production: the discrete mass defect is 100%
    write(&config, "scenario.injection = 1\ntime.steps = 2\n");
    let out = bin().arg("run").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("model error"), "stderr: {}", stderr(&out));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn unknown_config_key_is_an_input_error() {
    let dir = scratch_dir("unknown-key");
    let config = dir.join("run.conf");
    write(&config, "mesh.nx = 8\nmesh.sides = 4\n");
    let out = bin().arg("run").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("mesh.sides") && err.contains("line 2"), "stderr: {err}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn converge_needs_three_levels_and_a_manufactured_scenario() {
    let dir = scratch_dir("converge");
    let config = dir.join("study.conf");
    write(&config, "scenario.preset = pure_diffusion_mms\nmesh.nx = 4\nmesh.ny = 4\ntime.steps = 4\n");
    let out = bin().arg("converge").arg(&config).arg("--levels").arg("1").output().unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));

    let physical = dir.join("physical.conf");
    write(&physical, "scenario.preset = five_spot\n");
    let out = bin().arg("converge").arg(&physical).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));

    let out = bin().arg("converge").arg(&config).arg("--levels").arg("3").output().unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let table = std::fs::read_to_string(dir.join("out/convergence.csv")).unwrap();
    assert!(table.contains("err_conc_uniform"));
    assert_eq!(table.lines().filter(|l| !l.starts_with('#')).count(), 4);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn check_mesh_reports_metrics_and_parse_errors() {
    let dir = scratch_dir("check-mesh");
    let good = dir.join("square.mesh");
    write(
        &good,
        "mesh d=2\nvertices 4\n0 0\n1 0\n1 1\n0 1\ncells 1\n0 1 2 3\n",
    );
    let out = bin().arg("check-mesh").arg(&good).output().unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("mesh ok: 1 cells, 4 edges, 4 vertices"), "stdout: {text}");

    let bad = dir.join("bad.mesh");
    write(&bad, "mesh d=2\nvertices 1\n0 zero\ncells 0\n");
    let out = bin().arg("check-mesh").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains(":3:"), "stderr: {}", stderr(&out));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn invalid_hmm_threads_is_an_input_error() {
    let dir = scratch_dir("threads");
    let config = dir.join("run.conf");
    write(&config, "scenario.preset = still\ntime.steps = 1\n");
    let out = bin()
        .arg("run")
        .arg(&config)
        .env("HMM_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    let out = bin().arg("run").arg(&config).env("HMM_THREADS", "4").output().unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    std::fs::remove_dir_all(&dir).ok();
}
