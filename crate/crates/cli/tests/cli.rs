use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use partreg::bench::{ErrorSeries, RunManifest};

fn partreg(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_partreg")).env("PARTREG_OUT", out).args(args).output().unwrap()
}

fn only_run_dir(out: &Path) -> PathBuf {
    let dirs: Vec<PathBuf> = fs::read_dir(out).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "{dirs:?}");
    dirs.into_iter().next().unwrap()
}

fn manifest(dir: &Path) -> RunManifest {
    RunManifest::read_json(&dir.join("manifest.json")).unwrap()
}

#[test]
fn moments_run_writes_manifest_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = partreg(tmp.path(), &["diag-moments", "--n", "4", "--sigma", "0.125", "--d", "0.5", "--trials", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1);
    assert!(stdout.starts_with("diag-moments: max defect"));
    let dir = only_run_dir(tmp.path());
    assert!(dir.file_name().unwrap().to_str().unwrap().starts_with("diag-moments-"));
    let m = manifest(&dir);
    assert_eq!(m.name, "diag-moments");
    assert_eq!(m.seed, Some(11));
    assert_eq!(m.parameters["args"]["trials"], 2);
    assert_eq!(m.outputs, vec!["moments.json".to_string()]);
}

#[test]
fn unknown_flag_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = partreg(tmp.path(), &["diag-moments", "--bogus"]);
    assert!(!out.status.success());
}

#[test]
fn mesh_not_dividing_the_box_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = partreg(tmp.path(), &["ns2d", "--sigma", "0.3", "--T", "0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not divide"));
}

#[test]
fn abc_ladder_writes_one_series_per_mesh() {
    let tmp = tempfile::tempdir().unwrap();
    let out = partreg(tmp.path(), &["abc", "--n", "4", "--sigma-ladder", "2", "--T", "0.08"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = only_run_dir(tmp.path());
    for c in [10, 14] {
        let s = ErrorSeries::read_csv(&dir.join(format!("series_cells{c}.csv"))).unwrap();
        assert_eq!(s.len(), 2);
    }
    assert!(dir.join("eoc.csv").exists() && dir.join("eoc.txt").exists());
    assert!(dir.join("manifest.json").exists());
}

#[test]
fn zalesak_writes_the_snapshot_times() {
    let tmp = tempfile::tempdir().unwrap();
    let out = partreg(tmp.path(), &["zalesak", "--sigma", "0.1", "--T", "628"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = only_run_dir(tmp.path());
    for t in ["000", "079", "157", "236", "314", "393", "471", "550", "628"] {
        assert!(dir.join(format!("field_t{t}.csv")).exists(), "{t}");
        assert!(dir.join(format!("contour_t{t}.csv")).exists(), "{t}");
    }
    let header = fs::read_to_string(dir.join("particles_final.csv")).unwrap();
    assert!(header.starts_with("# partreg"));
}

#[test]
fn small_drivers_run() {
    let cases: &[&[&str]] = &[
        &["advect-eoc", "--n", "2", "--sigma", "1/8", "--sigma-ladder", "2"],
        &["disc-demo", "--sigma", "0.1", "--T", "0.01"],
        &["ns2d", "--sigma", "1/6", "--T", "1/16", "--policy", "step"],
        &["diag-decay", "--sigma", "1/8", "--k-max", "3"],
        &["diag-stability", "--n", "2", "--dump-matrix"],
    ];
    for args in cases {
        let tmp = tempfile::tempdir().unwrap();
        let out = partreg(tmp.path(), args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let dir = only_run_dir(tmp.path());
        for f in manifest(&dir).outputs {
            assert!(dir.join(&f).exists(), "{args:?}: missing {f}");
        }
    }
}

#[test]
fn repeated_runs_get_distinct_directories() {
    let tmp = tempfile::tempdir().unwrap();
    for _ in 0..2 {
        assert!(partreg(tmp.path(), &["diag-moments", "--trials", "1"]).status.success());
    }
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 2);
}
