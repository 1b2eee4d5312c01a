use std::path::Path;
use std::process::{Command, Output};

fn clusterfe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clusterfe"))
        .args(args)
        .output()
        .expect("spawn clusterfe")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).expect("read output")
}

/// Drops the timing columns (enc_ms, agg_ms) from metric rows.
fn without_timings(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|line| {
            if line.starts_with('#') {
                return line.to_string();
            }
            let cols: Vec<&str> = line.split(',').collect();
            cols.iter()
                .enumerate()
                .filter(|(i, _)| *i != 6 && *i != 7)
                .map(|(_, c)| *c)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect()
}

#[test]
fn too_few_participants_is_a_usage_error() {
    let out = clusterfe(&["simulate", "--participation", "0.03", "--clients", "30"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn unknown_flag_is_rejected() {
    let out = clusterfe(&["simulate", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_sizes_are_usage_errors() {
    assert_eq!(clusterfe(&["bench-encrypt", "--key-size", "100"]).status.code(), Some(2));
    assert_eq!(clusterfe(&["bench-encrypt", "--dims", "0"]).status.code(), Some(2));
    assert_eq!(clusterfe(&["bench-filter", "--bpe", "12"]).status.code(), Some(2));
    assert_eq!(clusterfe(&["bound-check", "--kappa", "2000", "--dims", "100"]).status.code(), Some(2));
    assert_eq!(clusterfe(&["simulate", "--dirichlet", "-1"]).status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic_modulo_timings() {
    let dir = tempfile::tempdir().unwrap();
    let args = |p: &str| {
        vec![
            "simulate".to_string(),
            "--clients".into(),
            "4".into(),
            "--rounds".into(),
            "2".into(),
            "--clusters".into(),
            "16".into(),
            "--key-size".into(),
            "128".into(),
            "--dirichlet".into(),
            "0.5".into(),
            "--seed".into(),
            "11".into(),
            "--out".into(),
            p.to_string(),
        ]
    };
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let argv = args(p.to_str().unwrap());
        let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
        let out = clusterfe(&argv);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (a, b) = (read(&a), read(&b));
    assert!(a.starts_with("# clusterfe simulate\n"));
    assert!(a.contains("# seed = 11\n"));
    assert!(a.contains("# partition = dirichlet:0.5\n"));
    assert_eq!(without_timings(&a), without_timings(&b));
    let rows: Vec<&str> = a.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("1,enccluster,"));
}

#[test]
fn single_cluster_attack_reports_na_inter_distance() {
    let out = clusterfe(&["attack-eval", "--kappa", "1", "--seeds", "2", "--rounds", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.ends_with(",NA")));
    let settings: Vec<&str> = rows.iter().map(|r| r.split(',').nth(1).unwrap()).collect();
    assert_eq!(settings, ["iid", "noniid", "iid", "noniid"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("sign test"));
}

#[test]
fn bound_check_rows_hold() {
    let out = clusterfe(&["bound-check", "--trials", "5", "--dims", "200", "--draws", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.ends_with(",true")));
}

#[test]
fn bench_reports_are_json_with_required_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("enc.json");
    let out = clusterfe(&[
        "bench-encrypt", "--clusters", "8", "--dims", "200", "--key-size", "128", "--repeat", "5",
        "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&read(&path)).unwrap();
    for field in ["config", "median_ms", "p10_ms", "p90_ms", "ratio"] {
        assert!(v.get(field).is_some(), "missing {field}");
    }
    assert!(v["ratio"].as_f64().unwrap() > 0.0);

    let out = clusterfe(&["bench-filter", "--dims", "1000", "--probes", "1000"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["bpe"], 8);
    assert!(v["bits_per_key"].as_f64().unwrap() > 8.0);
}
