//! The `bcdisp` command line: artifacts, exit codes and reproducibility.

use bcdisp::analysis::RegionBoundary;
use bcdisp::cli::main_with_args;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

fn base() -> Value {
    json!({
        "channel": {"total_power": 5.0, "alpha": 0.3, "beta": 0.6},
        "seed": 7,
        "region": {"criterion": "sep", "eps1": 0.1, "eps2": 0.1, "points": 21},
        "simulate": {"n": 32, "log_m1": 4.0, "log_m2": 3.0, "trials": 2000, "decoder": "sic"},
        "rcu": {"n": 32, "log_m1": 4.0, "log_m2": 3.0, "bound_kind": "jep_sic", "samples": 2000},
        "fading": {
            "h1": {"family": "rayleigh"}, "h2": {"family": "rayleigh"},
            "eps1": 0.1, "eps2": 0.1, "blocklengths": [100, 400]
        }
    })
}

fn write_config(dir: &Path, doc: &Value) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(doc).unwrap()).unwrap();
    p
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> i32 {
    let mut args = vec!["bcdisp", cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    main_with_args(args)
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn every_command_writes_versioned_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &base());
    let out = dir.path().join("out");
    for cmd in ["region", "simulate", "rcu", "fading"] {
        assert_eq!(run(cmd, &cfg, &out, &[]), 0, "{cmd}");
    }
    for f in ["region_sep.json", "simulate.json", "rcu.json", "fading.json"] {
        let v = read_json(&out.join(f));
        assert_eq!(v["schema"], 1, "{f}");
        assert!(v["config_fingerprint"].as_str().is_some_and(|s| s.len() == 64), "{f}");
        assert!(v["report_fingerprint"].as_str().is_some_and(|s| s.len() == 64), "{f}");
    }
    for f in ["region_sep.csv", "fading_outage.csv"] {
        let text = std::fs::read_to_string(out.join(f)).unwrap();
        assert_eq!(text.lines().next(), Some("criterion,eps1,eps2,x,y"));
        assert!(!RegionBoundary::parse_csv(&text).unwrap().is_empty());
    }
    let leftovers: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn sep_region_contains_the_requested_corner() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &base());
    assert_eq!(run("region", &cfg, dir.path(), &[]), 0);
    let rows = RegionBoundary::parse_csv(&std::fs::read_to_string(dir.path().join("region_sep.csv")).unwrap()).unwrap();
    let cfgv = bcdisp::model::ChannelConfig::gaussian(5.0, 0.3, 0.6).unwrap().validate().unwrap();
    let corner = bcdisp::analysis::sep_second_order_point(&cfgv, 0.1, 0.1).unwrap();
    assert!(rows.iter().any(|r| r.3 == corner.l1 && r.4 == corner.l2));
}

#[test]
fn deterministic_fading_reproduces_unfaded_corner() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = base();
    doc["fading"]["h1"] = json!({"family": "deterministic", "gain": 1.0});
    doc["fading"]["h2"] = json!({"family": "deterministic", "gain": 1.0});
    let cfg = write_config(dir.path(), &doc);
    assert_eq!(run("fading", &cfg, dir.path(), &[]), 0);
    let v = read_json(&dir.path().join("fading.json"));
    let c = bcdisp::analysis::first_order_corner(
        &bcdisp::model::ChannelConfig::gaussian(5.0, 0.3, 0.6).unwrap().validate().unwrap(),
    );
    assert!((v["corner"]["r1"].as_f64().unwrap() - c.r1).abs() < 1e-12);
    assert!((v["corner"]["r2"].as_f64().unwrap() - c.r2).abs() < 1e-12);
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    type Edit = Box<dyn Fn(&mut Value)>;
    let cases: Vec<(&str, Edit)> = vec![
        ("region", Box::new(|d| d["channel"]["alpha"] = json!(1.2))),
        ("region", Box::new(|d| d["region"] = json!({"criterion": "sep", "eps1": 0.1}))),
        ("region", Box::new(|d| d["channel"]["typo"] = json!(1))),
        ("rcu", Box::new(|d| d["rcu"]["bound_kind"] = json!("user3"))),
        ("fading", Box::new(|d| d["fading"]["eps1"] = json!(0.0))),
        ("fading", Box::new(|d| d.as_object_mut().unwrap().remove("fading").map(|_| ()).unwrap())),
        ("simulate", Box::new(|d| d.as_object_mut().unwrap().remove("seed").map(|_| ()).unwrap())),
    ];
    for (i, (cmd, edit)) in cases.iter().enumerate() {
        let mut doc = base();
        edit(&mut doc);
        let cfg = write_config(dir.path(), &doc);
        assert_eq!(run(cmd, &cfg, &dir.path().join(format!("o{i}")), &[]), 2, "case {i}");
    }
    let missing = dir.path().join("nope.json");
    assert_eq!(run("region", &missing, dir.path(), &[]), 2);
    assert_eq!(main_with_args(["bcdisp", "frobnicate"]), 2);
}

#[test]
fn seed_flag_supplies_missing_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = base();
    doc.as_object_mut().unwrap().remove("seed");
    let cfg = write_config(dir.path(), &doc);
    assert_eq!(run("rcu", &cfg, dir.path(), &["--seed", "3"]), 0);
    assert_eq!(read_json(&dir.path().join("rcu.json"))["seed"], 3);
}

#[test]
fn oversized_joint_simulation_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = base();
    doc["simulate"] = json!({
        "n": 128, "target": {"eps1": 0.1, "eps2": 0.1}, "decoder": "jnn", "trials": 100
    });
    let cfg = write_config(dir.path(), &doc);
    let out = dir.path().join("out");
    assert_eq!(run("simulate", &cfg, &out, &[]), 4);
    assert!(!out.join("simulate.json").exists());

    // Same result from the real binary.
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_bcdisp"))
        .args(["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&status.stderr).contains("rcu"));
}

#[test]
fn worker_count_does_not_change_reports() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = base();
    doc["simulate"]["batch"] = json!(37);
    let cfg = write_config(dir.path(), &doc);
    let mut prints = Vec::new();
    for w in ["1", "3"] {
        let out = dir.path().join(format!("w{w}"));
        assert_eq!(run("simulate", &cfg, &out, &["--workers", w]), 0);
        prints.push(std::fs::read(out.join("simulate.json")).unwrap());
    }
    assert_eq!(prints[0], prints[1]);
}

#[test]
fn rerun_overwrites_in_place() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &base());
    assert_eq!(run("region", &cfg, dir.path(), &[]), 0);
    let first = std::fs::read(dir.path().join("region_sep.csv")).unwrap();
    assert_eq!(run("region", &cfg, dir.path(), &[]), 0);
    assert_eq!(first, std::fs::read(dir.path().join("region_sep.csv")).unwrap());
}
