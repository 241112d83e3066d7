use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn klab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_klab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("KLAB_WORKERS")
        .output()
        .expect("spawn klab")
}

fn summary(dir: &Path, kind: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(format!("{kind}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn identity_suite_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = klab(&["run", "identity-suite", "--seed", "1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path(), "identity-suite");
    assert_eq!(s["estimates"]["all_pass"], Value::Bool(true));
    assert_eq!(s["count"], 3);
}

#[test]
fn khintchine_reports_a_median_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let ifs = configs().join("cantor.cfg");
    let out = klab(
        &["run", "khintchine", "--ifs", ifs.to_str().unwrap(), "--psi", "power:1,1", "--N", "1e6", "--samples", "100", "--seed", "7"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path(), "khintchine");
    assert!(s["estimates"]["sides"]["plus"]["median"].as_f64().unwrap() > 0.0);
    assert_eq!(s["seed"], 7);
    let rows = csv::Reader::from_path(dir.path().join("khintchine.csv")).unwrap().records().count();
    assert_eq!(rows, 100);
}

#[test]
fn walk_writes_one_row_per_replica() {
    let dir = tempfile::tempdir().unwrap();
    let out = klab(&["run", "walk", "--ifs", "builtin:cantor", "--steps", "30", "--samples", "500", "--seed", "3"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(dir.path().join("walk.csv")).unwrap();
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), ["n", "replica", "log_rate", "offset", "systole"]);
    assert_eq!(reader.records().count(), 500);
    assert_eq!(summary(dir.path(), "walk")["count"], 500);
}

#[test]
fn summaries_do_not_depend_on_worker_count() {
    let mut bytes = Vec::new();
    for workers in ["1", "3"] {
        let dir = tempfile::tempdir().unwrap();
        let out = klab(
            &["run", "translate", "--ifs", "builtin:cantor", "--t-grid", "10,100", "--samples", "2000", "--seed", "11", "--workers", workers],
            dir.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        bytes.push((
            std::fs::read(dir.path().join("translate.json")).unwrap(),
            std::fs::read(dir.path().join("translate.csv")).unwrap(),
        ));
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn manifest_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = configs().join("walk.toml");
    let out = klab(&["run", "walk", "--manifest", manifest.to_str().unwrap(), "--samples", "200", "--steps", "20"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path(), "walk");
    assert_eq!(s["count"], 200);
    assert_eq!(s["seed"], 7);
    assert_eq!(s["parameters"]["ifs_definition"]["base"], 3);
}

#[test]
fn invalid_input_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_psi = klab(&["run", "khintchine", "--ifs", "builtin:cantor", "--psi", "power:1", "--N", "100", "--samples", "1"], dir.path());
    assert_eq!(bad_psi.status.code(), Some(2));

    let missing = klab(&["run", "walk", "--ifs", "no/such/file.cfg", "--steps", "5", "--samples", "5"], dir.path());
    assert_eq!(missing.status.code(), Some(2));

    let manifest = dir.path().join("m.toml");
    std::fs::write(&manifest, "kind = \"walk\"\nseed = 1\n[params]\nsteps = 5\nbogus = 1\n").unwrap();
    let unknown = klab(&["run", "walk", "--manifest", manifest.to_str().unwrap()], dir.path());
    assert_eq!(unknown.status.code(), Some(2));

    let wrong_kind = klab(&["run", "translate", "--manifest", configs().join("walk.toml").to_str().unwrap()], dir.path());
    assert_eq!(wrong_kind.status.code(), Some(2));

    assert!(std::fs::read_dir(dir.path()).unwrap().all(|e| e.unwrap().path() == manifest));
}

#[test]
fn oversized_concentration_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = klab(
        &["run", "walk", "--ifs", "builtin:cantor", "--steps", "5", "--samples", "20001", "--radius", "0.05"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("walk.json").exists());
}

#[test]
fn every_shipped_config_loads() {
    for name in ["cantor.cfg", "lebesgue.cfg", "biased-cantor.cfg"] {
        let dir = tempfile::tempdir().unwrap();
        let ifs = configs().join(name);
        let out = klab(&["run", "regularity", "--ifs", ifs.to_str().unwrap(), "--samples", "200", "--replicas", "10"], dir.path());
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
