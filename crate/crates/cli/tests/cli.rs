use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
b = 0.0
m = 16
k_min = 2
k_max = 3
seeds_per_shell = 2
lemma_samples = 20

[domain]
kind = "interval"
length = 3.141592653589793

[nonlinearity]
kind = "power"
p = 6.0
"#;

fn kirchhoff(args: &[&str], out_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kirchhoff"));
    cmd.args(args);
    match out_dir {
        Some(d) => cmd.env("KIRCHHOFF_OUTPUT_DIR", d),
        None => cmd.env_remove("KIRCHHOFF_OUTPUT_DIR"),
    };
    cmd.output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_is_reproducible_and_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let (d1, d2) = (tmp.path().join("one"), tmp.path().join("two"));
    assert!(kirchhoff(&["run", &cfg], Some(&d1)).status.success());
    let out = kirchhoff(&["run", &cfg, "--output", d2.to_str().unwrap()], Some(&d1));
    assert!(out.status.success());

    let r1 = fs::read_to_string(d1.join("results.json")).unwrap();
    assert!(r1 == fs::read_to_string(d2.join("results.json")).unwrap());
    assert!(fs::read_to_string(d1.join("summary.txt")).unwrap().contains("elapsed"));
    let profile = fs::read_to_string(d1.join("profile_000.csv")).unwrap();
    assert_eq!(profile.lines().next(), Some("x,u"));
    assert_eq!(profile.lines().count(), 257);

    let bundle = d1.join("results.json");
    let out = kirchhoff(&["verify", bundle.to_str().unwrap(), "--config", &cfg], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["max_deviation"].as_f64().unwrap() <= 1e-12);
    let stored: serde_json::Value = serde_json::from_str(&r1).unwrap();
    assert_eq!(report["records"].as_u64().unwrap() as usize, stored["records"].as_array().unwrap().len());
}

#[test]
fn verify_detects_truncated_coefficients() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let dir = tmp.path().join("out");
    assert!(kirchhoff(&["run", &cfg], Some(&dir)).status.success());
    let path = dir.join("results.json");
    let mut bundle: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let coeffs = bundle["records"][0]["coefficients"].as_array_mut().unwrap();
    let (i, big) = coeffs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.as_f64().unwrap().abs().total_cmp(&b.1.as_f64().unwrap().abs()))
        .map(|(i, v)| (i, v.as_f64().unwrap()))
        .unwrap();
    coeffs[i] = serde_json::json!(format!("{big:.5e}").parse::<f64>().unwrap());
    fs::write(&path, serde_json::to_string(&bundle).unwrap()).unwrap();

    let out = kirchhoff(&["verify", path.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(5));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["max_deviation"].as_f64().unwrap() > 1e-12);
}

#[test]
fn rejections_exit_with_category() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("shade = 1\n{CONFIG}"));
    let out = kirchhoff(&["run", &cfg], Some(tmp.path()));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("shade"));

    let bogus = tmp.path().join("bundle.json");
    fs::write(&bogus, r#"{"schema_version": 99}"#).unwrap();
    let out = kirchhoff(&["verify", bogus.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));

    let out = kirchhoff(&["run", "/nonexistent/run.toml"], None);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn oracle_and_echo() {
    let out = kirchhoff(&["oracle", "--zeros", "1", "--b", "1"], None);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let t = report["scaling"]["t"].as_f64().unwrap();
    let s = report["dirichlet_norm_sq"].as_f64().unwrap();
    assert!((t.powi(4) - 1.0 - s * t * t).abs() < 1e-9);

    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG.replace("p = 6.0", "p = 3.0").as_str());
    let out = kirchhoff(&["echo-config", &cfg], None);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside p > 4"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("seeds_per_shell = 2"));
}
