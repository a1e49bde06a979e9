use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fracheat::cli::{decode_eigensystem, encode_eigensystem, error_json, exit_code, RunConfig};
use fracheat::domain::{Domain, DomainGrid};
use fracheat::measure::SpectralMeasure;
use fracheat::operator::assemble;
use fracheat::spectral::eigenpairs;
use fracheat::Error;
use serde_json::Value;

fn fracheat(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracheat"))
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn bootstrap_supercritical_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracheat(dir.path(), &["bootstrap", "--n", "3", "--s", "0.5"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["branch"], "supercritical");
    assert_eq!(v["p"], serde_json::json!([2.0, 6.0]));
    assert_eq!(v["p_exact"], serde_json::json!(["2", "6"]));
    assert_eq!(v["N"], 1);
    assert_eq!(v["w"], 3);
}

#[test]
fn symbol_of_half_half_measure() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, r#"{"measure":{"n":1,"s":0.5,"a_plus":0.5,"a_minus":0.5,"lambda2":0.5},"symbol":{"xi":[[2.0],[-1.0]],"trials":100}}"#)
        .unwrap();
    let out = fracheat(dir.path(), &["symbol", "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    let hash = v["config_hash"].as_str().unwrap().to_string();
    let csv_path = dir.path().join("out").join(format!("symbol-{hash}.csv"));
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let header = reader.headers().unwrap().clone();
    assert_eq!(&header[0], "config_hash");
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert!(rows.iter().all(|r| r[0] == hash));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let two = rows.iter().find(|r| r[col("xi_0")].parse::<f64>().unwrap() == 2.0).unwrap();
    assert_eq!(two[col("symbol")].parse::<f64>().unwrap(), 2.0);
}

#[test]
fn identical_configs_give_identical_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        assert!(fracheat(dir.path(), &["symbol", "--seed", "9"]).status.success());
        assert!(fracheat(dir.path(), &["lp-check", "--s", "0.4", "--h", "0.03125", "--family", "6"]).status.success());
    }
    let mut names: Vec<_> = fs::read_dir(a.path().join("out")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 4);
    for name in names {
        let x = fs::read(a.path().join("out").join(&name)).unwrap();
        let y = fs::read(b.path().join("out").join(&name)).unwrap();
        assert_eq!(x, y, "{name:?}");
    }
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["symbol", "--s", "1.5"],
        vec!["lp-check", "--case", "d"],
        vec!["eig", "--h=-0.1"],
        vec!["eig", "--bogus"],
        vec!["kernel", "--n", "2"],
    ] {
        let out = fracheat(dir.path(), &args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
        assert_eq!(err["exit_code"], 1);
        assert!(err["error"].is_string() && err["message"].is_string());
    }
    let config = dir.path().join("bad.json");
    fs::write(&config, r#"{"measure":{"n":2,"s":0.5,"isotropic":true}}"#).unwrap();
    let out = fracheat(dir.path(), &["weyl", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "measure and domain dimensions differ");
    fs::write(&config, r#"{"unknown_section":{}}"#).unwrap();
    assert_eq!(fracheat(dir.path(), &["symbol", "--config", config.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn numerical_errors_map_to_two() {
    for e in [
        Error::Quadrature("x".into()),
        Error::Factorization("x".into()),
        Error::EigenConvergence { index: 3, residual: 1.0 },
        Error::Assembly("x".into()),
    ] {
        assert_eq!(exit_code(&e), 2);
        assert_eq!(error_json(&e)["exit_code"], 2);
    }
    assert_eq!(exit_code(&Error::NotElliptic { mu1: 0.0 }), 1);
}

#[test]
fn config_hash_ignores_key_order() {
    let a = RunConfig::from_json(r#"{"h":0.01,"seed":4,"lp":{"p":3.0,"case":"c"}}"#).unwrap();
    let b = RunConfig::from_json(r#"{"lp":{"case":"c","p":3.0},"seed":4,"h":0.01}"#).unwrap();
    assert_eq!(a.hash(), b.hash());
    let c = RunConfig::from_json(r#"{"lp":{"case":"c","p":3.0},"seed":5,"h":0.01}"#).unwrap();
    assert_ne!(a.hash(), c.hash());
}

#[test]
fn eigensystem_blob_round_trip() {
    let g = DomainGrid::build(Domain::interval(-1.0, 1.0), 1.0 / 32.0).unwrap();
    let ops = assemble(&SpectralMeasure::isotropic(1, 0.5).unwrap(), &g).unwrap();
    let eig = eigenpairs(&ops, 12).unwrap();
    let bytes = encode_eigensystem(&eig);
    let back = decode_eigensystem(&bytes, &ops).unwrap();
    assert_eq!(back.values, eig.values);
    assert_eq!(back.vectors, eig.vectors);
    assert!(decode_eigensystem(&bytes[..bytes.len() - 8], &ops).is_err());
}

#[test]
fn evolve_reuses_cached_eigensystem() {
    let dir = tempfile::tempdir().unwrap();
    let eig = fracheat(dir.path(), &["eig", "--h", "0.03125", "--m", "20"]);
    assert!(eig.status.success());
    let blob = stdout_json(&eig)["summary"]["blob"].as_str().unwrap().to_string();
    let evolve = fracheat(dir.path(), &["evolve", "--h", "0.03125", "--m", "20"]);
    assert!(evolve.status.success(), "{}", String::from_utf8_lossy(&evolve.stderr));
    let v = stdout_json(&evolve);
    assert_eq!(v["summary"]["l2_nonincreasing"], true);
    assert!(dir.path().join("out").join(blob).exists());
}
