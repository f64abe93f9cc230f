use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use coopsteer::data::{load_udacity_csv, resolve_dataset, FrameRef, Role};
use serde_json::Value;

fn coopsteer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coopsteer"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = coopsteer(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn gen(dir: &Path, frames: usize, extra: &[&str]) {
    let n = frames.to_string();
    let mut args = vec!["gen-synth", "--frames", &n, "--size", "16x16", "--seed", "3", "--out", p(dir)];
    args.extend_from_slice(extra);
    ok(&args);
}

fn train(data: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec![
        "train", "--data", p(data), "--x", "2", "--dt", "4", "--epochs", "1", "--batch", "16", "--seed", "5", "--out", p(out),
    ];
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn gen_synth_writes_rows_and_images_reproducibly() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    gen(&a, 100, &[]);
    gen(&b, 100, &[]);
    let csv = fs::read_to_string(a.join("interpolated.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
    assert_eq!(fs::read_dir(a.join("center")).unwrap().count(), 100);
    assert_eq!(csv, fs::read_to_string(b.join("interpolated.csv")).unwrap());
    for entry in fs::read_dir(a.join("center")).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(fs::read(a.join("center").join(&name)).unwrap(), fs::read(b.join("center").join(&name)).unwrap());
    }
    let manifest = json(&a.join("manifest.json"));
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["command"], "gen-synth");
    assert_eq!(manifest["seed"], 3);
}

#[test]
fn glare_count_is_within_three_sigma() {
    let tmp = tempfile::tempdir().unwrap();
    gen(tmp.path(), 100, &["--glare", "0.2"]);
    let (csv, root) = resolve_dataset(tmp.path());
    let seq = load_udacity_csv(&csv, &root, 1 << 24).unwrap();
    let white = (0..seq.len())
        .filter(|&i| seq.frame(FrameRef { index: i, role: Role::Ego }).unwrap().pixels.iter().all(|&v| v == 255))
        .count();
    let (mean, sigma) = (20.0, (100.0f64 * 0.2 * 0.8).sqrt());
    assert!((white as f64 - mean).abs() <= 3.0 * sigma, "{white} glare frames");
}

#[test]
fn train_writes_artifacts_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen(&data, 50, &[]);
    let (r1, r2) = (tmp.path().join("r1"), tmp.path().join("r2"));
    train(&data, &r1, &[]);
    train(&data, &r2, &[]);
    for f in ["model.ckpt", "metrics.json", "plot_loss.dat", "manifest.json"] {
        assert!(r1.join(f).is_file(), "missing {f}");
    }
    assert_eq!(fs::read(r1.join("metrics.json")).unwrap(), fs::read(r2.join("metrics.json")).unwrap());
    assert_eq!(fs::read(r1.join("model.ckpt")).unwrap(), fs::read(r2.join("model.ckpt")).unwrap());
    let metrics = json(&r1.join("metrics.json"));
    assert_eq!(metrics["kind"], "metrics");
    assert_eq!(metrics["report"]["history"].as_array().unwrap().len(), 1);
    let plot = fs::read_to_string(r1.join("plot_loss.dat")).unwrap();
    assert!(plot.starts_with('#'));
    assert_eq!(plot.lines().count(), 2);
}

#[test]
fn eval_sweep_and_trace_from_a_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen(&data, 120, &[]);
    let run = tmp.path().join("run");
    train(&data, &run, &[]);
    let ckpt = run.join("model.ckpt");
    let trained = json(&run.join("metrics.json"));

    let eval = tmp.path().join("eval");
    ok(&["eval", "--data", p(&data), "--ckpt", p(&ckpt), "--out", p(&eval)]);
    let evaluated = json(&eval.join("metrics.json"));
    assert_eq!(evaluated["kind"], "evaluation");
    let (a, b) = (trained["report"]["val"]["rmse"].as_f64().unwrap(), evaluated["val"]["rmse"].as_f64().unwrap());
    assert!((a - b).abs() < 1e-12, "{a} vs {b}");

    let sweep = tmp.path().join("sweep");
    ok(&["sweep-dt", "--data", p(&data), "--ckpt", p(&ckpt), "--out", p(&sweep)]);
    let csv = fs::read_to_string(sweep.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "dt,rmse_train,rmse_val,status");
    assert_eq!(csv.lines().count(), 21);
    assert_eq!(json(&sweep.join("sweep.json"))["table"]["rows"].as_array().unwrap().len(), 20);
    assert!(sweep.join("plot_rmse_vs_dt.dat").is_file());

    let trace = tmp.path().join("trace");
    ok(&["trace", "--data", p(&data), "--ckpt", p(&ckpt), "--out", p(&trace)]);
    let rows = fs::read_to_string(trace.join("trace.csv")).unwrap().lines().count() - 1;
    // x = 2, dt = 4 over 120 frames.
    assert_eq!(rows, 120 - 4 - 2 * 2 + 2);
    let doc = json(&trace.join("trace.json"));
    assert_eq!(doc["trace"]["rows"].as_array().unwrap().len(), rows);
}

#[test]
fn sweep_x_marks_infeasible_points() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen(&data, 30, &[]);
    let out = tmp.path().join("sx");
    ok(&[
        "sweep-x", "--data", p(&data), "--values", "1,2,20", "--dt", "4", "--epochs", "1", "--batch", "8", "--out", p(&out),
    ]);
    let doc = json(&out.join("sweep.json"));
    let rows = doc["table"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["status"], "ok");
    assert_eq!(rows[2]["status"], "infeasible");
}

#[test]
fn config_file_supplies_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen(&data, 50, &[]);
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"x": 2, "dt": 4, "epochs": 1, "batch": 16, "no_augment": true}"#).unwrap();
    let out = tmp.path().join("run");
    ok(&["train", "--config", p(&cfg), "--data", p(&data), "--out", p(&out)]);
    let m = json(&out.join("metrics.json"));
    assert_eq!(m["report"]["train_config"]["x"], 2);
    assert!(m["report"]["train_config"]["augment"].is_null());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen(&data, 30, &[]);
    let out = p(tmp.path());
    let code = |args: &[&str]| coopsteer(args).status.code();

    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["train", "--bogus"]), Some(2));
    assert_eq!(code(&["eval", "--data", p(&data), "--ckpt", "/nonexistent/model.ckpt", "--out", out]), Some(2));
    assert_eq!(code(&["train", "--data", p(&data), "--x", "0", "--out", out]), Some(3));
    assert_eq!(code(&["train", "--data", p(&data), "--dt", "40", "--out", out]), Some(4));
    assert_eq!(code(&["train", "--data", "/nonexistent/data", "--out", out]), Some(6));

    let bad = tmp.path().join("bad");
    fs::create_dir(&bad).unwrap();
    fs::write(bad.join("interpolated.csv"), "index,timestamp\n1,2\n").unwrap();
    assert_eq!(code(&["train", "--data", p(&bad), "--out", out]), Some(4));

    let manifest = json(&tmp.path().join("manifest.json"));
    assert_eq!(manifest["status"], "failed");
    assert!(manifest["error"].as_str().unwrap().contains("missing column"));
}
