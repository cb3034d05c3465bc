use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dsii_core::{Field, GridSpec, Space};
use serde_json::Value;

fn dsii(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsii")).args(args).output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn dir_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn forward_of_zero_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let q = tmp.path().join("zero.dsf");
    dsii_core::io::save(&Field::zeros(GridSpec::new(16, 4.0).unwrap(), Space::Z), &q).unwrap();
    let out = tmp.path().join("run");
    let o = dsii(&["--out", dir_str(&out), "forward", "--q", dir_str(&q)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&out.join("forward.json"));
    assert_eq!(summary["plancherel_defect"].as_f64(), Some(0.0));
    let (r, meta) = dsii_core::io::read_field_with_meta(fs::File::open(out.join("r.dsf")).unwrap()).unwrap();
    assert!(r.data().iter().all(|v| v.norm() == 0.0));
    assert_eq!(meta["config_hash"], summary["config_hash"].as_str().unwrap());
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["status"], "complete");
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 2);
}

#[test]
fn roundtrip_recovers_gaussian() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dsii(&["--out", dir_str(tmp.path()), "--grid-n", "64", "--grid-L", "10", "roundtrip"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let err = json(&tmp.path().join("roundtrip.json"))["rel_l2_error"].as_f64().unwrap();
    assert!(err < 1e-3, "round trip error {err}");
}

#[test]
fn criticality_brown_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dsii(&["--out", dir_str(tmp.path()), "criticality", "--n", "1"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("hypotheses hold"));
    let rep = json(&tmp.path().join("criticality.json"));
    assert_eq!(rep["verdict"], "hypotheses hold");
    assert!(rep["report"]["checked_count"].as_u64().unwrap() <= 64);

    let o = dsii(&["--out", dir_str(tmp.path()), "criticality", "--n", "1", "--exponents", "4"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("hypotheses fail"));
}

#[test]
fn reruns_are_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [&["lambda", "--n", "1", "--samples", "2e4"][..], &["criticality", "--n", "2"][..]] {
        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        for d in [&a, &b] {
            let mut full = vec!["--out", dir_str(d), "--seed", "11"];
            full.extend_from_slice(args);
            assert!(dsii(&full).status.success());
        }
        let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(names.len() >= 3);
        for name in names {
            assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?} differs");
        }
        fs::remove_dir_all(&a).unwrap();
        fs::remove_dir_all(&b).unwrap();
    }
}

#[test]
fn lambda_csv_is_stamped() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(dsii(&["--out", dir_str(tmp.path()), "lambda", "--samples", "1e4"]).status.success());
    let csv = fs::read_to_string(tmp.path().join("lambda.csv")).unwrap();
    let hash = json(&tmp.path().join("config.json"))["config_hash"].as_str().unwrap().to_string();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], format!("# config_hash={hash}"));
    assert_eq!(lines[2], "samples,ratio,std_err,tail_index");
    assert!(lines[3].starts_with("10000,"));
}

#[test]
fn exit_codes_follow_error_class() {
    let tmp = tempfile::tempdir().unwrap();

    let bad = tmp.path().join("bad");
    let o = dsii(&["--out", dir_str(&bad), "--grid-n", "3", "forward"]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["class"], "validation");
    assert_eq!(json(&bad.join("error.json"))["error"]["class"], "validation");

    let alias = tmp.path().join("alias");
    let o = dsii(&["--out", dir_str(&alias), "--grid-n", "32", "--grid-L", "8", "expansion", "--kladder", "4,8,16"]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(json(&alias.join("manifest.json"))["status"], "incomplete");

    let cfg = tmp.path().join("starved.json");
    fs::write(&cfg, r#"{"grid":{"n":48,"L":10},"solver":{"method":"krylov","tol":1e-14,"max_iter":1,"restart":1}}"#)
        .unwrap();
    let o = dsii(&["--out", dir_str(&tmp.path().join("num")), "--config", dir_str(&cfg), "forward"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    fs::write(&cfg, r#"{"grid":{"n":64,"L":10},"seed":3,"task":{"n":1}}"#).unwrap();
    let out = tmp.path().join("run");
    let o = dsii(&["--config", dir_str(&cfg), "--seed", "5", "--out", dir_str(&out), "criticality", "--n", "2"]);
    assert!(o.status.success());
    let resolved = json(&out.join("config.json"));
    assert_eq!(resolved["seed"], 5);
    assert_eq!(resolved["grid"]["n"], 64);
    assert_eq!(resolved["task"]["n"], 2);
}
