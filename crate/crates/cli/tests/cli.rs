use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn baflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_baflow"))
        .args(args)
        .arg("--output-dir")
        .arg(dir)
        .env_remove("BAFLOW_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn gaussian_spectrum_example() {
    let d = tempfile::tempdir().unwrap();
    let o = baflow(d.path(), &["gaussian", "spectrum", "--sigma2", "1", "--beta", "1", "--n", "4"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(d.path().join("gaussian_spectrum.json"));
    assert_eq!(r["alpha"], 0.5);
    let ev: Vec<f64> = r["eigenvalues"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(ev, vec![0.5, 0.25, 0.125, 0.0625]);
}

#[test]
fn dissipation_check_example() {
    let d = tempfile::tempdir().unwrap();
    let o = baflow(d.path(), &["dissipation-check", "--model", "two-point", "--beta-d", "2", "--dt", "1e-3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(d.path().join("dissipation.json"));
    assert!(r["max_abs_err"].as_f64().unwrap() <= 1e-5);
    assert!(r["halving_ratio"].as_f64().unwrap() >= 3.5);
}

#[test]
fn reruns_are_byte_identical_and_checksums_match() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["verify-all", "--seed", "42", "--criteria", "2,3,14"];
    assert_eq!(code(&baflow(a.path(), &args)), 0);
    assert_eq!(code(&baflow(b.path(), &[&args[..], &["--jobs", "1"]].concat())), 0);
    let manifest = json(a.path().join("verify-all.manifest.json"));
    for f in manifest["files"].as_array().unwrap() {
        let name = f["path"].as_str().unwrap();
        let bytes = std::fs::read(a.path().join(name)).unwrap();
        assert_eq!(hex::encode(Sha256::digest(&bytes)), f["sha256"].as_str().unwrap());
        assert_eq!(bytes, std::fs::read(b.path().join(name)).unwrap(), "{name} differs");
    }
    let ma = std::fs::read(a.path().join("verify-all.manifest.json")).unwrap();
    let mb = std::fs::read(b.path().join("verify-all.manifest.json")).unwrap();
    assert_eq!(ma, mb);
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    // unknown flag and parameters outside the model's domain
    assert_eq!(code(&baflow(d.path(), &["flow", "--bogus"])), 1);
    assert_eq!(code(&baflow(d.path(), &["gaussian", "spectrum", "--beta", "0.3"])), 1);
    assert_eq!(code(&baflow(d.path(), &["flow", "--q0", "0.5,0.6"])), 1);
    // numerical: a failing acceptance check, named on stderr
    let o = baflow(d.path(), &["verify-all", "--criteria", "5"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("C05"));
    assert!(d.path().join("verify.json").exists());
    // I/O
    assert_eq!(code(&baflow(d.path(), &["flow", "--problem", "/definitely/not/here.json"])), 3);
}

#[test]
fn config_file_with_flag_override() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"seed": 3, "format": "json", "params": {"model": "three-cluster", "dt": 0.1, "t_max": 5}}"#,
    )
    .unwrap();
    let o = baflow(d.path(), &["flow", "--config", cfg.to_str().unwrap(), "--t-max", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(d.path().join("flow.manifest.json"));
    assert_eq!(m["inputs"]["params"]["t_max"], 1.0);
    assert_eq!(m["inputs"]["params"]["dt"], 0.1);
    assert_eq!(m["inputs"]["global"]["seed"], 3);
    let t = json(d.path().join("trajectory.json"));
    assert_eq!(t["rows"].as_array().unwrap().len(), 11);
    assert_eq!(t["columns"].as_array().unwrap().len(), 1 + 15 + 4);

    std::fs::write(&cfg, r#"{"params": {"no_such_key": 1}}"#).unwrap();
    assert_eq!(code(&baflow(d.path(), &["flow", "--config", cfg.to_str().unwrap()])), 1);
}

#[test]
fn bits_scale_free_energy_columns() {
    let nats = tempfile::tempdir().unwrap();
    let bits = tempfile::tempdir().unwrap();
    let args = ["flow", "--q0", "0.9,0.1", "--t-max", "1", "--format", "json"];
    assert_eq!(code(&baflow(nats.path(), &args)), 0);
    assert_eq!(code(&baflow(bits.path(), &[&args[..], &["--units", "bits"]].concat())), 0);
    let fe = |dir: &Path| json(dir.join("trajectory.json"))["rows"][0][3].as_f64().unwrap();
    let q = |dir: &Path| json(dir.join("trajectory.json"))["rows"][0][1].as_f64().unwrap();
    assert!((fe(bits.path()) - fe(nats.path()) * std::f64::consts::LOG2_E).abs() < 1e-12);
    assert_eq!(q(bits.path()), q(nats.path()));
}

#[test]
fn output_dir_from_environment() {
    let d = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_baflow"))
        .args(["mimo", "--p-n", "5"])
        .env("BAFLOW_OUTPUT_DIR", d.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(d.path().join("mimo.manifest.json").exists());
    let csv = std::fs::read_to_string(d.path().join("water_filling.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.starts_with("total_power,p_0,p_1,p_2,level"));
}

#[test]
fn sweep_exports_have_expected_columns() {
    let d = tempfile::tempdir().unwrap();
    for args in [
        &["model", "two-point"][..],
        &["model", "two-scale", "--t-max", "5"],
        &["gaussian", "phase", "--points", "11"],
        &["wz", "--points", "11"],
    ] {
        let o = baflow(d.path(), args);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let head = |f: &str| std::fs::read_to_string(d.path().join(f)).unwrap().lines().next().unwrap().to_string();
    assert!(head("gap_surface.csv").starts_with("alpha,beta_d,lambda_star"));
    assert!(head("two_scale.csv").ends_with("bound_line"));
    assert_eq!(head("gaussian_phase.csv"), "beta,s,field");
    assert_eq!(head("wz_rate_gap.csv"), "rho,rate_gap");
    assert_eq!(head("wz_beta_ratio.csv"), "rho,beta_eff_ratio");
    assert_eq!(head("wz_phase.csv"), "rho,s,field");
}
