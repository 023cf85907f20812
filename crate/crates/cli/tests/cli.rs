use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn otaeq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otaeq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn every_subcommand_writes_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["isi-prob", "isi-prob-vs-m", "ber", "discrete-ber", "sinr-sweep", "gamma-fit", "sep"] {
        let path = dir.path().join(format!("{cmd}.csv"));
        let out = otaeq(&[cmd, "--trials", "100", "--seed", "3", "--out", path.to_str().unwrap()]);
        assert!(out.status.success(), "{cmd}: {}", stderr(&out));
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let width = lines.next().unwrap().split(',').count();
        let rows: Vec<_> = lines.collect();
        assert!(!rows.is_empty(), "{cmd}: no rows");
        for row in rows {
            assert_eq!(row.split(',').count(), width, "{cmd}: {row}");
        }
    }
}

#[test]
fn same_seed_same_bytes_at_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let cfg = config("reference.toml");
    for (path, threads) in [(&a, "1"), (&b, "3")] {
        let out = otaeq(&[
            "sinr-sweep", "--config", &cfg, "--trials", "300", "--threads", threads,
            "--out", path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn shipped_configs_validate() {
    for name in ["reference.toml", "sigma_s1.toml", "sigma_s2.toml", "exponential_pdp.toml"] {
        let out = otaeq(&["validate", &config(name)]);
        assert!(out.status.success(), "{name}: {}", stderr(&out));
    }
}

#[test]
fn validate_lists_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let text = fs::read_to_string(config("reference.toml"))
        .unwrap()
        .replace("M = 128", "M = 0")
        .replace("N_b = 2", "N_b = 0");
    fs::write(&path, text).unwrap();
    let out = otaeq(&["validate", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("M ≥ 1 violated"), "{err}");
    assert!(err.contains("N_b ≥ 1 violated"), "{err}");
}

#[test]
fn amplitude_source_must_be_unique() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("both.toml");
    let mut text = fs::read_to_string(config("sigma_s1.toml")).unwrap();
    text.push_str("\n[geometry]\nd_tx_ris = 35.51\nd_ris_rx = 20.22\nd_tx_rx = 55.73\nh_tx = 10.0\nh_ris = 4.0\nh_rx = 1.0\nf_c = 5.0\n");
    fs::write(&path, text).unwrap();
    let out = otaeq(&["ber", "--config", path.to_str().unwrap(), "--out", dir.path().join("x.csv").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("sigma_override / geometry"), "{}", stderr(&out));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("typo.toml");
    let text = fs::read_to_string(config("reference.toml")).unwrap().replace("M = 128", "M = 128\nelments = 4");
    fs::write(&path, text).unwrap();
    let out = otaeq(&["validate", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("elments"), "{}", stderr(&out));
}

#[test]
fn unwritable_output_fails() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = otaeq(&["gamma-fit", "--trials", "100", "--out", blocker.join("x.csv").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).starts_with("error:"), "{}", stderr(&out));
}

#[test]
fn default_config_round_trips() {
    let out = otaeq(&["default-config"]);
    assert!(out.status.success());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("default.toml");
    fs::write(&path, &out.stdout).unwrap();
    assert!(otaeq(&["validate", path.to_str().unwrap()]).status.success());
}
