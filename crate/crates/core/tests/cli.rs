use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

use dplab::cli::{dispatch, EXIT_OK, EXIT_USAGE, EXIT_VIOLATION};
use dplab::io::read_field_binary;

fn run(args: &[&str], out: &Path) -> i32 {
    let mut argv = vec!["dplab"];
    argv.extend_from_slice(args);
    argv.extend_from_slice(&["--out", out.to_str().unwrap()]);
    dispatch(argv)
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn profile_outputs_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("p");
    assert_eq!(run(&["profile", "--N", "1024"], &dir), EXIT_OK);
    let m = manifest(&dir);
    assert_eq!(m["tool"], "dplab");
    assert_eq!(m["subcommand"], "profile");
    assert_eq!(m["config"]["c"], 3.0);
    assert_eq!(m["config"]["k"], 1.0);
    assert_eq!(m["config"]["L"], 64.0);
    assert_eq!(m["config"]["N"], 1024);
    assert!(m["config_file"].is_null());
    assert_eq!(m["violations"].as_array().unwrap().len(), 0);
    for name in ["profile.csv", "phi.bin", "profile.json"] {
        let hash = m["outputs"][name].as_str().unwrap();
        assert_eq!(hash.len(), 64, "{name}");
    }

    let phi = read_field_binary(&mut fs::File::open(dir.join("phi.bin")).unwrap()).unwrap();
    assert_eq!(phi.len(), 1024);
    assert!((phi.max() - 0.769861413392).abs() < 1e-9);

    let csv = fs::read_to_string(dir.join("profile.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "x,phi,phi_x,rho,psi_tilde,w");
    assert_eq!(lines.count(), 1024);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["evolve", "--N", "256", "--L", "48", "--tend", "0.5", "--delta", "1e-2", "--shape", "random:3"];
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run(&args, &a), EXIT_OK);
    assert_eq!(run(&args, &b), EXIT_OK);
    for name in ["history.csv", "snapshot_000000.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    assert_eq!(manifest(&a)["outputs"], manifest(&b)["outputs"]);
}

#[test]
fn config_file_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# lab settings\nc = 4\nk = 0.5\nN = 2048\nL = 48\n").unwrap();
    let dir = tmp.path().join("out");
    let code = run(&["profile", "--config", cfg.to_str().unwrap(), "--c", "3.5"], &dir);
    assert_eq!(code, EXIT_OK);
    let m = manifest(&dir);
    assert_eq!(m["config"]["c"], 3.5);
    assert_eq!(m["config"]["k"], 0.5);
    assert_eq!(m["config"]["N"], 2048);
    assert_eq!(m["config_file"], cfg.to_str().unwrap());

    fs::write(&cfg, "speed = 4\n").unwrap();
    assert_eq!(run(&["profile", "--config", cfg.to_str().unwrap()], &dir), EXIT_USAGE);
}

#[test]
fn usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("x");
    assert_eq!(run(&["profile", "--c", "2"], &dir), EXIT_USAGE);
    assert_eq!(run(&["profile", "--N", "1023"], &dir), EXIT_USAGE);
    assert_eq!(run(&["profile", "--L", "8", "--N", "256"], &dir), EXIT_USAGE);
    assert_eq!(run(&["profile", "--bogus"], &dir), EXIT_USAGE);
    assert_eq!(run(&["evolve", "--N", "512", "--L", "48", "--dt", "0.2"], &dir), EXIT_USAGE);
    assert_eq!(dispatch(["dplab", "--version"]), EXIT_OK);
}

#[test]
fn violations_exit_two_and_are_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("coarse");
    assert_eq!(run(&["profile", "--N", "64", "--L", "48"], &dir), EXIT_VIOLATION);
    let v = manifest(&dir)["violations"].as_array().unwrap().clone();
    assert!(!v.is_empty());
    assert!(v[0].as_str().unwrap().contains("residual"));
}

#[test]
fn check_identities_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("id");
    assert_eq!(run(&["check-identities", "--N", "1024"], &dir), EXIT_OK);
    assert!(dir.join("identities.json").exists());
}

#[test]
fn binary_runs_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("spec");
    let status = Command::new(env!("CARGO_BIN_EXE_dplab"))
        .args(["spectrum", "--N", "256", "--L", "48", "--out"])
        .arg(&dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_OK));
    let s: Value = serde_json::from_str(&fs::read_to_string(dir.join("spectrum.json")).unwrap()).unwrap();
    assert_eq!(s["negative_count"], 1);
    assert_eq!(s["zero_count"], 1);

    let status = Command::new(env!("CARGO_BIN_EXE_dplab"))
        .args(["profile", "--c", "1", "--out"])
        .arg(tmp.path().join("bad"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_USAGE));
}
