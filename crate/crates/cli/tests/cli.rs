use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_limitset"))
}

fn scratch(name: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("limitset-cli-{name}-{}", std::process::id()));
    fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn cogrowth_from_config_writes_outputs() {
    let dir = scratch("cogrowth");
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, "kind=cogrowth\ncore=theta\n").unwrap();
    let out = bin().args(["cogrowth", "--config"]).arg(&cfg).arg("--out").arg(&dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rec: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((rec["report"]["core"]["omega"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-9);
    assert!(fs::read_to_string(dir.join("cogrowth.csv")).unwrap().starts_with("n,count\n"));
    assert!(dir.join("cogrowth.json").exists() && dir.join("cogrowth.dat").exists());
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn malformed_key_is_a_usage_error() {
    let dir = scratch("bad");
    let out = bin().args(["qrtree", "--set", "colour=red"]).arg("--out").arg(&dir).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, "kind=floyd\n").unwrap();
    let out = bin().args(["cogrowth", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn lambda_flag_reaches_floyd() {
    let dir = scratch("floyd");
    let out = bin().args(["floyd", "--lambda", "0.3", "--set", "pairs=20", "--set", "depth=5"]).arg("--out").arg(&dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.join("floyd.csv")).unwrap();
    assert!(csv.starts_with("pair_id,floyd_dist,visual_dist,ratio\n"));
    assert_eq!(csv.lines().count(), 21);
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn verify_subset_and_corrupted_expected_values() {
    let out = bin().args(["verify", "--only", "1,3"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert_eq!(text.lines().filter(|l| l.contains("criterion")).count(), 2);
    let dir = scratch("verify");
    let bad = dir.join("expected.txt");
    fs::write(&bad, "c1.theta.omega=0.5\n").unwrap();
    let out = bin().args(["verify", "--only", "1", "--expected"]).arg(&bad).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(!out.status.success());
    assert!(text.contains("-c1.theta.omega=0.5") && text.contains("+c1.theta.omega=0.693147"));
    fs::remove_dir_all(dir).unwrap();
}
