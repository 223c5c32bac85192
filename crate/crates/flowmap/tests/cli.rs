use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn flowmap(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_flowmap"));
    cmd.args(args).env_remove("FLOWMAP_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    flowmap(&args, &[])
}

fn assert_ok(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
}

const SMALL_EX1: &str = r#"{
    "example": "ex1",
    "dataset": {"size": 300, "micro_steps": 40},
    "model": {"kind": "network", "hidden": [8, 8]},
    "train": {"epochs": 3, "batch_size": 32, "log_every": 0},
    "scenario": {"t_end": 1.0}
}"#;

#[test]
fn simulate_writes_one_row_per_grid_point() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"example": "ex1", "scenario": {"t_end": 1.0}}"#);
    let out = dir.path().join("out");
    assert_ok(&run("simulate", &cfg, &out, &[]));
    let text = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x_0");
    assert_eq!(lines.len(), 12);
}

#[test]
fn usage_and_config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");

    let cfg = write_config(dir.path(), "a.json", r#"{"system": "pendulum"}"#);
    let o = run("simulate", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for p in ["linear_scalar", "predator_prey", "forced_oscillator", "heat22"] {
        assert!(err.contains(p), "{err}");
    }

    let cfg = write_config(dir.path(), "b.json", r#"{"example": "ex1", "epochs": 3}"#);
    assert_eq!(run("simulate", &cfg, &out, &[]).status.code(), Some(2));

    let cfg = write_config(dir.path(), "c.json", "{not json");
    assert_eq!(run("simulate", &cfg, &out, &[]).status.code(), Some(2));

    let missing = dir.path().join("missing.json");
    assert_eq!(run("simulate", &missing, &out, &[]).status.code(), Some(2));

    assert_eq!(flowmap(&["frobnicate"], &[]).status.code(), Some(2));
    assert_eq!(flowmap(&["simulate"], &[]).status.code(), Some(2));

    let cfg = write_config(dir.path(), "d.json", r#"{"example": "ex1"}"#);
    let o = flowmap(
        &["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[("FLOWMAP_THREADS", "zero")],
    );
    assert_eq!(o.status.code(), Some(2));

    // predict without a trained checkpoint
    assert_eq!(run("predict", &cfg, &dir.path().join("empty"), &[]).status.code(), Some(2));
}

#[test]
fn gen_data_is_deterministic_and_thread_independent() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL_EX1);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    let args = |out: &Path| {
        vec![
            "gen-data".to_string(),
            "--config".into(),
            cfg.to_str().unwrap().into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let go = |out: &Path, threads: &str| {
        let a = args(out);
        let refs: Vec<&str> = a.iter().map(String::as_str).collect();
        flowmap(&refs, &[("FLOWMAP_THREADS", threads)])
    };
    assert_ok(&go(&a, "1"));
    let first = fs::read(a.join("dataset.csv")).unwrap();
    assert_ok(&go(&a, "1"));
    assert_eq!(fs::read(a.join("dataset.csv")).unwrap(), first, "rerun must overwrite identically");
    assert_ok(&go(&b, "3"));
    assert_eq!(fs::read(b.join("dataset.csv")).unwrap(), first);
    assert_eq!(fs::read(a.join("dataset.json")).unwrap(), fs::read(b.join("dataset.json")).unwrap());
    assert_eq!(fs::read_to_string(a.join("dataset.csv")).unwrap().lines().count(), 301);

    assert_ok(&run("gen-data", &cfg, &c, &["--seed", "7"]));
    assert_ne!(fs::read(c.join("dataset.csv")).unwrap(), first);
}

#[test]
fn train_predict_resume_pipeline() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL_EX1);
    let out = dir.path().join("out");
    assert_ok(&run("gen-data", &cfg, &out, &[]));
    assert_ok(&run("train", &cfg, &out, &[]));
    let loss = fs::read_to_string(out.join("loss.csv")).unwrap();
    assert_eq!(loss.lines().next(), Some("epoch,train_mse,val_mse"));
    assert_eq!(loss.lines().count(), 4);

    let o = run("predict", &cfg, &out, &[]);
    assert_ok(&o);
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["steps"], 10);
    assert!(metrics["rel_linf"].as_f64().unwrap().is_finite());
    assert_eq!(fs::read_to_string(out.join("prediction.csv")).unwrap().lines().count(), 12);
    assert_eq!(fs::read_to_string(out.join("reference.csv")).unwrap().lines().count(), 12);

    // resuming for zero epochs reproduces the checkpoint exactly
    let ckpt = fs::read(out.join("model.json")).unwrap();
    let resume = write_config(
        dir.path(),
        "r.json",
        &SMALL_EX1.replace(r#""epochs": 3,"#, r#""epochs": 0, "resume": true,"#),
    );
    assert_ok(&run("train", &resume, &out, &[]));
    assert_eq!(fs::read(out.join("model.json")).unwrap(), ckpt);

    let more = write_config(
        dir.path(),
        "m.json",
        &SMALL_EX1.replace(r#""epochs": 3,"#, r#""epochs": 2, "resume": true,"#),
    );
    assert_ok(&run("train", &more, &out, &[]));
    let ck: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("model.json")).unwrap()).unwrap();
    assert_eq!(ck["training"]["epochs_completed"], 5);
    assert_eq!(fs::read_to_string(out.join("loss.csv")).unwrap().lines().count(), 6);

    // a checkpoint for one system is refused for another
    let other = write_config(dir.path(), "o.json", r#"{"example": "ex2", "scenario": {"t_end": 1.0}}"#);
    assert_eq!(run("predict", &other, &out, &[]).status.code(), Some(2));
}

#[test]
fn polynomial_model_and_bench_sweep() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"example": "ex1_poly", "dataset": {"size": 400, "micro_steps": 40},
            "model": {"kind": "polynomial", "degree": 2, "sweep": [1, 2]},
            "scenario": {"t_end": 2.0}}"#,
    );
    let out = dir.path().join("out");
    let o = run("bench", &cfg, &out, &[]);
    assert_ok(&o);
    let table = fs::read_to_string(out.join("error_vs_degree.csv")).unwrap();
    assert_eq!(table.lines().next(), Some("degree,features,rank,residual_mse,linf,rel_linf,terminal"));
    assert_eq!(table.lines().count(), 3);
    assert!(out.join("model_p2.json").exists());
    assert!(String::from_utf8_lossy(&o.stdout).contains("polynomial-p2"));

    assert_ok(&run("train", &cfg, &out, &[]));
    assert_ok(&run("predict", &cfg, &out, &[]));
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["model"], "polynomial-p2");
}

#[test]
fn bounds_checks_and_table() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"example": "ex1"}"#);
    let out = dir.path().join("out");
    assert_ok(&run("bounds", &cfg, &out, &[]));
    let results: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("bounds.json")).unwrap()).unwrap();
    assert_eq!(results[0]["mode"], "gronwall");
    assert_eq!(results[0]["satisfied"], true);
    assert_eq!(results[1]["satisfied"], true);
    assert_eq!(fs::read_to_string(out.join("bounds_1_rollout.csv")).unwrap().lines().count(), 102);

    let cfg = write_config(
        dir.path(),
        "t.json",
        r#"{"example": "ex2", "bounds": [{"mode": "table", "l1": 1.0, "l2": 1.0, "eta": 1e-3,
            "l_phi": 1.0, "e": 1e-4, "delta": 0.1, "steps": 10}]}"#,
    );
    assert_ok(&run("bounds", &cfg, &out, &[]));
    let text = fs::read_to_string(out.join("bounds_0_table.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("n,t,input,rollout,combined,appendix"));
    assert_eq!(text.lines().count(), 12);

    // a violated bound is a numeric failure
    let cfg = write_config(
        dir.path(),
        "v.json",
        r#"{"example": "ex1", "bounds": [{"mode": "rollout", "signal": ["1", "cos(t)"],
            "basis": {"kind": "lagrange", "degree": 2}, "x0": [2.0], "delta": 0.1, "steps": 50,
            "e": 1e-3, "noise": "aligned", "l_phi": 0.5}]}"#,
    );
    assert_eq!(run("bounds", &cfg, &out, &[]).status.code(), Some(1));
}
