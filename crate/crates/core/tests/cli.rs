use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use urlab::suite::{SuiteReport, PACKING_UNBOUNDED};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn urlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_urlab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn report(out: &Path) -> SuiteReport {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn missing_config_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = urlab(
        &["verify", "--config", "/nonexistent/urlab.json"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("config not found"));
}

#[test]
fn unknown_override_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("plane_riesz.json");
    let o = urlab(
        &[
            "gen",
            "--config",
            cfg.to_str().unwrap(),
            "--set",
            "levels.depth=3",
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn flat_plane_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("plane_riesz.json");
    let o = urlab(
        &[
            "verify",
            "--config",
            cfg.to_str().unwrap(),
            "--set",
            "seed=3",
        ],
        tmp.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = report(tmp.path());
    assert!(r.passed);
    assert_eq!(r.config.seed, 3);
    assert!(r.constants.c_pack.value.unwrap() <= 1e-10);
    assert!(r.functionals.modified.iter().all(|f| f.ratio == 0.0));
    assert!(tmp.path().join("summary.csv").exists());
    assert!(tmp.path().join("ratios.svg").exists());
}

#[test]
fn stages_run_in_order() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("plane_riesz.json");
    let o = urlab(
        &[
            "alpha",
            "--config",
            cfg.to_str().unwrap(),
            "--set",
            "levels.j_max=3",
            "--set",
            "levels.j_floor=4",
        ],
        tmp.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let names: Vec<String> = std::fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    for stage in ["gen-", "cubes-", "whitney-", "alpha-"] {
        assert!(
            names.iter().any(|n| n.starts_with(stage)),
            "{stage} missing in {names:?}"
        );
    }
    assert!(!names
        .iter()
        .any(|n| n.starts_with("sqfn-") || n == "report.json"));
}

#[test]
fn cantor_dust_reports_unbounded_packing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("cantor_riesz.json");
    let o = urlab(
        &[
            "verify",
            "--config",
            cfg.to_str().unwrap(),
            "--set",
            "levels.j_max=5",
            "--set",
            "levels.j_floor=6",
            "--set",
            "suite.sign_vectors=0",
        ],
        tmp.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(String::from_utf8_lossy(&o.stdout).contains(PACKING_UNBOUNDED));
    let r = report(tmp.path());
    assert!(!r.passed);
    assert!(r.findings.iter().any(|f| f == PACKING_UNBOUNDED));
}
