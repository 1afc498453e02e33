use std::path::Path;
use std::process::{Command, Output};

fn qbm(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbm"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("QBM_SEED")
        .output()
        .expect("qbm runs")
}

fn manifest(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn identities_pass_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let out = qbm(&["--suite", "identities"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let reports: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("identities.json")).unwrap()).unwrap();
    assert!(!reports.is_empty());
    assert!(reports.iter().all(|r| r["passed"] == true));
    let m = manifest(dir.path());
    assert_eq!(m["config"]["suite"], "identities");
    assert_eq!(m["suites"]["identities"]["failed"], 0);
    assert!(m["build"].as_str().unwrap().contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn only_filter_runs_exactly_the_named_family() {
    let dir = tempfile::tempdir().unwrap();
    let out = qbm(&["--suite", "identities", "--only", "wdw", "--format", "csv"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("identities.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.starts_with("wdw,")));
}

#[test]
fn invalid_configuration_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qbm(&["--q", "1.2"], dir.path()).status.code(), Some(2));
    assert_eq!(qbm(&["--only", "no-such-family"], dir.path()).status.code(), Some(2));
    assert_eq!(qbm(&["--suite", "everything"], dir.path()).status.code(), Some(2));
    // nothing ran, so no manifest
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn simulation_is_reproducible_and_honours_the_depth() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["--suite", "simulate", "--paths", "1", "--seed", "7", "--depth", "12", "--q", "0.3"];
    assert_eq!(qbm(&args, a.path()).status.code(), Some(0));
    assert_eq!(qbm(&args, b.path()).status.code(), Some(0));
    let read = |d: &Path| std::fs::read(d.join("paths").join("path_7.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    let text = String::from_utf8(read(a.path())).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,t_k,B_k");
    assert_eq!(lines.len(), 1 + 13);
    assert!(lines[13].starts_with("12,"));
    for plot in ["density.csv", "kurtosis.csv"] {
        assert!(dir_has(a.path(), plot), "missing {plot}");
    }
}

fn dir_has(out: &Path, name: &str) -> bool {
    out.join("plots").join(name).metadata().map(|m| m.len() > 0).unwrap_or(false)
}

#[test]
fn seed_falls_back_to_the_environment_and_config_files_are_read() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "suite = simulate\npaths = 2\n# the flag below wins\nq = 0.9\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_qbm"))
        .args(["--config", conf.to_str().unwrap(), "--q", "0.4", "--out"])
        .arg(dir.path())
        .env("QBM_SEED", "40")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(dir.path());
    assert_eq!(m["config"]["seed"], 40);
    assert_eq!(m["config"]["q"], 0.4);
    assert!(dir.path().join("paths/path_40.csv").exists());
    assert!(dir.path().join("paths/path_41.csv").exists());
}

#[test]
fn convergence_studies_pass_and_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = qbm(&["--suite", "verify", "--only", "ito,sde"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let studies: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("studies.json")).unwrap()).unwrap();
    assert_eq!(studies.len(), 2);
    assert_eq!(studies[0]["cases"], 400);
    assert_eq!(studies[1]["cases"], 100);
}

#[test]
fn monte_carlo_suite_runs_on_a_small_batch() {
    let dir = tempfile::tempdir().unwrap();
    let out = qbm(&["--suite", "verify", "--only", "mc", "--paths", "2000", "--format", "csv"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("verify.csv")).unwrap();
    assert!(text.lines().any(|l| l.starts_with("isometry-x3,")));
    assert!(text.lines().any(|l| l.starts_with("cross-13,")));
}

#[test]
fn an_impossible_threshold_fails_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = qbm(&["--suite", "verify", "--only", "mc", "--paths", "200", "--z-threshold", "1e-9"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL verify"));
    assert!(manifest(dir.path())["suites"]["verify"]["failed"].as_u64().unwrap() > 0);
}
