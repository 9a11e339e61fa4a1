use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use contract_forge::cli::{ModelSpec, Summary};

fn manifest() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

fn bundled() -> PathBuf {
    manifest().join("specs/uniform_normal.json")
}

fn run(args: &[&str], spec: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_contract-forge"))
        .args(args)
        .arg("--spec")
        .arg(spec)
        .arg("--output-dir")
        .arg(out)
        .output()
        .unwrap()
}

fn summary(dir: &Path) -> Summary {
    serde_json::from_slice(&std::fs::read(dir.join("summary.json")).unwrap()).unwrap()
}

fn edited_spec(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let mut v: serde_json::Value = serde_json::from_slice(&std::fs::read(bundled()).unwrap()).unwrap();
    edit(&mut v);
    let path = dir.join("spec.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&v).unwrap()).unwrap();
    path
}

#[test]
fn solve_writes_allocation_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["solve"], &bundled(), dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path());
    let tilde = s.tilde_v1.unwrap();
    assert!((0.42..=0.44).contains(&tilde), "{tilde}");
    assert!(s.assumptions.certified);
    assert!(s.min_delta.is_none() && s.simulation.is_none());

    let csv = std::fs::read_to_string(dir.path().join("allocation.csv")).unwrap();
    let spec = ModelSpec::load(&bundled()).unwrap();
    let rows = csv.lines().count() - 1;
    // Evenly spaced nodes plus the refinement band and the cutoff itself.
    assert!(rows >= spec.grid.n_v1 && rows <= spec.grid.n_v1 + 32, "{rows}");
    assert!(!dir.path().join("ic.csv").exists());
}

#[test]
fn summary_survives_a_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    run(&["verify"], &bundled(), dir.path());
    let text = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let s: Summary = serde_json::from_str(&text).unwrap();
    assert_eq!(String::from_utf8(contract_forge::cli::to_json(&s)).unwrap(), text);
    assert_eq!(s.pass, Some(true));
}

#[test]
fn audit_of_counterexample_exits_with_ic_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mech = manifest().join("specs/counterexample_mechanism.json");
    let out = run(&["audit", mech.to_str().unwrap()], &bundled(), dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gains"));
    let s = summary(dir.path());
    assert_eq!(s.mechanism.as_deref(), Some("psi^2"));
    assert_eq!(s.q1_monotone, Some(true));
}

#[test]
fn invalid_spec_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = edited_spec(dir.path(), |v| v["quadrature"]["tail_mass"] = 0.0.into());
    let out = run(&["solve"], &spec, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tail_mass"));
    assert!(!dir.path().join("out").exists());

    let spec = edited_spec(dir.path(), |v| v["grid"]["extra"] = 1.into());
    assert_eq!(run(&["solve"], &spec, &dir.path().join("out")).status.code(), Some(2));
    assert_eq!(
        run(&["solve"], &dir.path().join("missing.json"), dir.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn unwritable_output_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, b"").unwrap();
    let out = run(&["solve"], &bundled(), &blocker.join("out"));
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn bad_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_contract-forge"))
        .args(["check", "--spec"])
        .arg(bundled())
        .arg("--output-dir")
        .arg(dir.path())
        .env("CONTRACT_FORGE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn spec_round_trips_through_serde() {
    let spec = ModelSpec::load(&bundled()).unwrap();
    let text = serde_json::to_string(&spec).unwrap();
    assert_eq!(ModelSpec::from_json(&text).unwrap(), spec);
}
