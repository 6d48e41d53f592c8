use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn rwre(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rwre"));
    cmd.args(args).arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().expect("run rwre")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn env_dump_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = rwre(&["env", "dump"], Some(&configs().join("env_dump.json")), tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["env.json", "sites.csv", "s.csv"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
    let dump = json(&tmp.path().join("env.json"));
    // B_4 in two dimensions.
    assert_eq!(dump["sites"].as_array().unwrap().len(), 81);
    let s = std::fs::read_to_string(tmp.path().join("s.csv")).unwrap();
    assert!(s.lines().any(|l| l == "0,0.0" || l == "0,0"), "S_0 row missing");
}

#[test]
fn walk_and_levelsets_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let walk = tmp.path().join("walk");
    let out = rwre(&["walk", "run"], Some(&configs().join("walk_run.json")), &walk);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&walk.join("walk.json"));
    assert_eq!(report["walks"].as_array().unwrap().len(), 4);

    let levels = tmp.path().join("levels");
    let out = rwre(&["levelsets"], Some(&configs().join("levelsets.json")), &levels);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&levels.join("levelsets.json"));
    assert_eq!(report["bernoulli"]["count"], 24);
    assert_eq!(report["bernoulli"]["stated_count"], 16);
    assert!(levels.join("classes.csv").exists());
}

#[test]
fn quenched_without_valleys_reports_outcomes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = rwre(
        &["quenched"],
        Some(&configs().join("quenched_novalley.json")),
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&tmp.path().join("quenched.json"));
    assert_eq!(report["passed"], 0);
    assert_eq!(report["no_valley"], 4);
    assert!(report["verdict"].is_null());
}

#[test]
fn errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"environment":{"d":0,"increment_law":{"kind":"rademacher"},"delta_law":{"kind":"zero"},"seed":1},"shells":[1]}"#).unwrap();
    let out = rwre(&["levelsets"], Some(&bad), &tmp.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    let out = rwre(
        &["levelsets"],
        Some(&tmp.path().join("missing.json")),
        &tmp.path().join("o"),
    );
    assert_eq!(out.status.code(), Some(2));

    let out = rwre(&["quenched"], None, &tmp.path().join("o"));
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(&bad, r#"{"shells":[1],"unknown":true}"#).unwrap();
    let out = rwre(&["levelsets"], Some(&bad), &tmp.path().join("o"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_exit_code_follows_hard_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("oracle.json");
    // Singletons only: every exact identity holds, so the run is clean.
    std::fs::write(
        &cfg,
        r#"{"suite":{"dims":[1],"radii":[2],"seeds_per_case":2,"mixing_ls":[1]},"dirichlet":{"instances":2},"mc_configurations":2,"mc_repetitions":2000}"#,
    )
    .unwrap();
    let out = rwre(&["oracle"], Some(&cfg), &tmp.path().join("o"));
    let report = json(&tmp.path().join("o/oracle.json"));
    let expected = if report["pass"].as_bool().unwrap() { 0 } else { 1 };
    assert_eq!(out.status.code(), Some(expected));
    assert!(tmp.path().join("o/checks.csv").exists());
}
