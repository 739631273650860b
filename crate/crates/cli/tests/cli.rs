use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tomolab"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn estimate_writes_records() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["estimate", "--seed", "3", "--config"])
        .arg(config("wrong_prior.json"))
        .arg("--out")
        .arg(out.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for f in ["record.json", "steps.csv", "covariance.csv", "timing.json"] {
        assert!(out.path().join(f).exists(), "{f} missing");
    }
    let steps = fs::read_to_string(out.path().join("steps.csv")).unwrap();
    assert_eq!(steps.lines().count(), 32);
}

#[test]
fn same_seed_same_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let status = bin()
            .args(["estimate", "--seed", "11", "--config"])
            .arg(config("wrong_prior.json"))
            .arg("--out")
            .arg(dir.path())
            .status()
            .unwrap();
        assert!(status.success());
    }
    for f in ["record.json", "steps.csv", "covariance.csv"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn sample_from_flags() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["sample", "--prior", "bcsz", "--dim", "2", "--rank", "2", "--n", "25", "--out"])
        .arg(out.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = fs::read_to_string(out.path().join("samples.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 26);
    assert_eq!(lines[1].split(',').count(), 16);
}

#[test]
fn config_errors_exit_2() {
    let out = tempfile::tempdir().unwrap();
    let bad = out.path().join("bad.json");
    fs::write(&bad, r#"{"schema_version": 1, "mode": "estimate", "prior": {"fiducial": {"ensemble": "haar"}}}"#).unwrap();
    let cases: Vec<Vec<std::ffi::OsString>> = vec![
        vec!["estimate".into(), "--config".into(), bad.clone().into()],
        vec!["estimate".into(), "--config".into(), out.path().join("missing.json").into()],
        vec!["risk".into(), "--config".into(), config("wrong_prior.json").into()],
        vec!["sample".into(), "--prior".into(), "haar".into()],
        vec!["estimate".into()],
    ];
    for args in cases {
        let status = bin().args(&args).arg("--out").arg(out.path()).status().unwrap();
        assert_eq!(status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn thread_cap_is_validated() {
    let out = tempfile::tempdir().unwrap();
    let status = bin()
        .env("TOMOLAB_THREADS", "zero")
        .args(["sample", "--prior", "ginibre", "--n", "3", "--out"])
        .arg(out.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let status = bin()
        .env("TOMOLAB_THREADS", "2")
        .args(["sample", "--prior", "ginibre", "--n", "3", "--out"])
        .arg(out.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
}
