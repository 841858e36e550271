use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

const SPEC: &str = r#"{"form":"product","count":[[1,0.5],[2,0.5]],"step":[[-1,0.5],[1,0.5]]}"#;

fn brw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brw-arena")).args(args).output().expect("binary runs")
}

fn json_out(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn setup(config: &str) -> (tempfile::TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("spec.json"), SPEC).unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, config).unwrap();
    let cfg = cfg.to_str().unwrap().to_string();
    (dir, cfg)
}

fn run(cmd: &str, cfg: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", cfg, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    brw(&args)
}

#[test]
fn calibrate_reports_tangent_point() {
    let (dir, _) = setup("{}");
    let v = json_out(&brw(&["calibrate", dir.path().join("spec.json").to_str().unwrap()]));
    let theta = v["calibration"]["theta_o"].as_f64().unwrap();
    assert!((theta - 1.1966403094908453).abs() < 1e-8, "{theta}");
    assert!((v["speed"].as_f64().unwrap() - 0.8326269598360458).abs() < 1e-8);
    assert_eq!(v["default_window"], 27);
}

#[test]
fn check_assumptions_passes_reference() {
    let (dir, _) = setup("{}");
    let out = brw(&["check-assumptions", dir.path().join("spec.json").to_str().unwrap()]);
    let v = json_out(&out);
    assert!(v.is_object());
}

#[test]
fn construct_pair_writes_loadable_specs() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_out(&brw(&["construct-pair", "--blue-mean", "3", "--out", dir.path().to_str().unwrap()]));
    let (tr, tb) = (v["theta_r"].as_f64().unwrap(), v["theta_b"].as_f64().unwrap());
    assert!(3.0 * tr < tb);
    assert_eq!(v["red_jump"], 3);
    for name in ["red.json", "blue.json"] {
        let path = dir.path().join(name);
        json_out(&brw(&["calibrate", path.to_str().unwrap()]));
    }
}

#[test]
fn simulate_is_reproducible_and_manifested() {
    let text = r#"{"red_spec": "spec.json", "horizon": 60, "replicas": 8, "master_seed": 11}"#;
    let (dir, cfg) = setup(text);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    json_out(&run("simulate", &cfg, &a, &[]));
    json_out(&run("simulate", &cfg, &b, &[]));
    json_out(&run("simulate", &cfg, &c, &["--seed", "12"]));
    let traj = |d: &Path| fs::read(d.join("trajectories.csv")).unwrap();
    assert_eq!(traj(&a), traj(&b));
    assert_ne!(traj(&a), traj(&c));
    let header = String::from_utf8(traj(&a)).unwrap();
    assert!(header.starts_with("replica,n,M_n,L_n,total,saturated_flag\n"));
    assert_eq!(header.lines().count(), 1 + 8 * 61);

    let manifest: Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    let hash: String = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(manifest["config_sha256"], hash);
    assert_eq!(manifest["master_seed"], 11);
    assert_eq!(manifest["command"], "simulate");
    let seeded: Value = serde_json::from_str(&fs::read_to_string(c.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(seeded["master_seed"], 12);
}

#[test]
fn arena_coexistence_writes_tables() {
    let (dir, cfg) = setup(
        r#"{"red_spec": "spec.json", "blue_spec": "spec.json", "horizon": 60, "replicas": 4, "z_grid": [1, 2]}"#,
    );
    let out = dir.path().join("o");
    let v = json_out(&run("arena", &cfg, &out, &[]));
    assert!(v["fraction_both_above"].as_f64().is_some());
    let arena = fs::read_to_string(out.join("arena.csv")).unwrap();
    assert!(arena.starts_with("n,M_r,L_r,M_b,L_b,right_gap,left_gap,"));
    assert!(out.join("replicas.csv").exists());
}

#[test]
fn arena_noncoexistence_from_constructed_pair() {
    let (dir, cfg) = setup(
        r#"{"arena": "noncoexistence", "construct_pair": 3.0, "horizon": 80, "replicas": 3, "gap_fit_start": 20}"#,
    );
    let out = dir.path().join("o");
    json_out(&run("arena", &cfg, &out, &[]));
    assert!(out.join("replicas.csv").exists());
}

#[test]
fn overshoot_keeps_censored_replicas_on_failure() {
    // caps of a few generations censor most replicas, so the fit must fail
    let (dir, cfg) = setup(
        r#"{"red_spec": "spec.json", "replicas": 20, "z_grid": [2, 3, 4], "cap_factor": 0.1}"#,
    );
    let out = dir.path().join("o");
    let result = run("overshoot", &cfg, &out, &[]);
    assert!(!result.status.success());
    let rows = fs::read_to_string(out.join("overshoot.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 20 * 3);
    assert!(rows.contains(",true,"));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report["error"].as_str().unwrap().contains("uncensored"));
}

#[test]
fn overshoot_fits_with_room() {
    let (dir, cfg) = setup(
        r#"{"red_spec": "spec.json", "replicas": 60, "z_grid": [0.5, 1.0, 1.5], "cap_factor": 50, "generation_cap": 20000}"#,
    );
    let out = dir.path().join("o");
    let v = json_out(&run("overshoot", &cfg, &out, &[]));
    assert!(v["slope"].as_f64().unwrap().is_finite());
    assert!(out.join("levels.csv").exists());
}

#[test]
fn tailfit_fluct_and_democracy_run() {
    let (dir, cfg) = setup(
        r#"{"red_spec": "spec.json", "horizon": 20, "replicas": 3000, "n_grid": [30, 40], "horizons": [4, 6], "q": 2}"#,
    );
    let (t, f, d) = (dir.path().join("t"), dir.path().join("f"), dir.path().join("d"));
    let tail = json_out(&run("tailfit", &cfg, &t, &[]));
    assert!(tail["rate"].as_f64().unwrap() > 0.0);
    assert!(t.join("tail.csv").exists());
    let fl = json_out(&run("fluct", &cfg, &f, &["--seed", "3"]));
    assert_eq!(fl["summaries"].as_array().unwrap().len(), 2);
    assert!(f.join("fluct.csv").exists());
    json_out(&run("democracy", &cfg, &d, &[]));
    assert!(d.join("manifest.json").exists());
}

#[test]
fn bad_configs_are_rejected() {
    let (dir, cfg) = setup(r#"{"red_spec": "spec.json", "replicas": 0}"#);
    assert!(!run("simulate", &cfg, &dir.path().join("o"), &[]).status.success());
    let (dir, cfg) = setup(r#"{"red_spec": "spec.json", "bogus": 1}"#);
    assert!(!run("simulate", &cfg, &dir.path().join("o"), &[]).status.success());
    let (dir, cfg) = setup(r#"{"horizon": 5}"#);
    let out = run("simulate", &cfg, &dir.path().join("o"), &[]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("red_spec"));
}
