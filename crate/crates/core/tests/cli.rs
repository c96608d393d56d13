use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bpire-lab"))
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = bin().arg("theorem2").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(&config, r#"{"arcsine": {"replicas": 0}}"#).unwrap();
    let out = bin().arg("arcsine").arg("--config").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("arcsine.replicas"));
}

#[test]
fn validate_env_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().arg("validate-env").arg("--out").arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["provenance"]["subcommand"], "validate-env");
    assert!(report["provenance"]["config"].get("workers").is_none());
}

#[test]
fn failing_threshold_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("strict.json");
    fs::write(
        &config,
        r#"{"arcsine": {"n": 200, "replicas": 500}, "thresholds": {"arcsine_ks": 0.0}}"#,
    )
    .unwrap();
    let out = bin()
        .arg("arcsine")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let csv = fs::read_to_string(dir.path().join("out/arcsine_ecdf.csv")).unwrap();
    assert!(csv.starts_with("# bpire-lab"));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    fs::write(&config, r#"{"seed": 1, "arcsine": {"n": 100, "replicas": 300}}"#).unwrap();
    let run = |seed: &str, out: &str| {
        bin()
            .args(["arcsine", "--seed", seed, "--config"])
            .arg(&config)
            .arg("--out")
            .arg(dir.path().join(out))
            .output()
            .unwrap();
        fs::read_to_string(dir.path().join(out).join("report.json")).unwrap()
    };
    let a = run("7", "a");
    let b = run("8", "b");
    assert!(a.contains("\"seed\": 7"));
    assert_ne!(a, b);
}
