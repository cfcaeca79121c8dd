use std::path::Path;
use std::process::{Command, Output};

fn coordmlp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coordmlp"))
        .args(args)
        .current_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("../.."))
        .output()
        .unwrap()
}

fn error_line(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("an error line on stderr");
    serde_json::from_str(line).unwrap()
}

#[test]
fn toy_writes_tables_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = coordmlp(&["toy-fig2", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("orderings hold: true"));
    for f in ["manifest.toml", "toy_panels.csv", "toy_orderings.csv"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let manifest = std::fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    assert!(manifest.contains("experiment = \"toy-fig2\""));
}

#[test]
fn wave_alias_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = coordmlp(&[
        "wave", "--out", dir.path().to_str().unwrap(), "--steps", "5", "--seed", "9", "--a", "7",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = std::fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 9"));
    assert!(manifest.contains("steps = 5"));
    assert!(manifest.contains("k_high = 7.0"));
    assert!(dir.path().join("wave_regularized.wav").exists());
}

#[test]
fn missing_config_is_an_io_error() {
    let out = coordmlp(&["image-uneven", "--config", "no/such/file.toml"]);
    assert!(!out.status.success());
    assert_eq!(error_line(&out)["error"], "io");
}

#[test]
fn invalid_rate_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = coordmlp(&["image-sparse", "--out", dir.path().to_str().unwrap(), "--rate", "1.5"]);
    assert!(!out.status.success());
    let err = error_line(&out);
    assert!(err["error"] == "config" || err["error"] == "domain", "{err}");
    assert!(err["message"].as_str().unwrap().contains("rate"));
}

#[test]
fn unconfigured_arch_is_rejected() {
    let out = coordmlp(&["wave", "--arch", "rff", "--out", "unused"]);
    assert!(!out.status.success());
    assert_eq!(error_line(&out)["error"], "config");
}

#[test]
fn config_for_another_command_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("toy.toml");
    std::fs::write(&cfg, "experiment = \"toy-fig2\"\nseed = 0\n\n[toy]\ngrid = 64\ncutoff = 8.0\nw_norm = 10.0\nsigmas = [0.5, 0.2, 0.1]\nsmall_w_norm = 3.0\ntuned_w_norms = [2.0, 10.0]\n").unwrap();
    let out = coordmlp(&["spectrum-depth", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert_eq!(error_line(&out)["error"], "config");
}
