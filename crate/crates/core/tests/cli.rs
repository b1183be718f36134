use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gnnbench::profiler::Trace;
use gnnbench::train::read_log;

fn gnnbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gnnbench"))
        .args(args)
        .env_remove("GNNBENCH_CATALOG")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen_small(dir: &Path, name: &str, extra: &[&str]) -> String {
    let out = dir.join(name);
    let mut args = vec!["gen", "--events", "8", "--particles", "4", "--layers", "4", "--out", s(&out)];
    args.extend_from_slice(extra);
    if !extra.contains(&"--seed") {
        args.extend(["--seed", "3"]);
    }
    let o = gnnbench(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    s(&out).to_string()
}

const TINY_MODEL: [&str; 4] = ["--hidden", "16,8", "--iterations", "2"];

fn train(data: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--data", data, "--out", s(out)];
    args.extend_from_slice(&TINY_MODEL);
    args.extend_from_slice(extra);
    if !extra.contains(&"--epochs") {
        args.extend(["--epochs", "2"]);
    }
    gnnbench(&args)
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen_small(dir.path(), "a", &[]);
    let b = gen_small(dir.path(), "b", &[]);
    for name in ["event_00000.json", "event_00007.json", "manifest.json", "sizes.csv"] {
        let x = fs::read(Path::new(&a).join(name)).unwrap();
        let y = fs::read(Path::new(&b).join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let c = gen_small(dir.path(), "c", &["--seed", "4"]);
    assert_ne!(
        fs::read(Path::new(&a).join("event_00000.json")).unwrap(),
        fs::read(Path::new(&c).join("event_00000.json")).unwrap()
    );
}

#[test]
fn train_writes_log_trace_and_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), "data", &[]);
    let run = dir.path().join("run");
    let o = train(&data, &run, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let log = read_log(&run.join("train.log")).unwrap();
    assert_eq!(log.len(), 2);
    assert!(log.iter().all(|l| l.loss.is_finite() && l.seconds > 0.0));
    let trace = Trace::load(&run.join("trace.json")).unwrap();
    assert!(!trace.is_empty());
    assert_eq!(trace.meta.epoch_seconds.len(), 2);
    assert!(trace.records.iter().any(|r| r.op.ends_with("/unsorted_segment_sum")));
    assert!(run.join("checkpoint.json").exists());
}

#[test]
fn workers_match_large_batch_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), "data", &[]);
    let (w, b) = (dir.path().join("w2"), dir.path().join("b2"));
    assert_eq!(code(&train(&data, &w, &["--workers", "2"])), 0);
    assert_eq!(code(&train(&data, &b, &["--batch", "2"])), 0);
    assert_eq!(
        fs::read(w.join("checkpoint.json")).unwrap(),
        fs::read(b.join("checkpoint.json")).unwrap()
    );
    let scaling = fs::read_to_string(w.join("scaling.txt")).unwrap();
    assert!(scaling.contains("efficiency"), "{scaling}");
}

#[test]
fn single_class_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), "data", &["--false-factor", "0"]);
    let o = train(&data, &dir.path().join("run"), &[]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn usage_and_io_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    assert_eq!(code(&train(s(&missing), &dir.path().join("run"), &[])), 2);
    assert_eq!(code(&gnnbench(&["train", "--bogus"])), 2);
    assert_eq!(code(&gnnbench(&[])), 2);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = gnnbench(&["gen", "--events", "1", "--particles", "2", "--out", s(&blocker.join("sub"))]);
    assert_eq!(code(&o), 2);
    let data = gen_small(dir.path(), "data", &[]);
    assert_eq!(code(&train(&data, &dir.path().join("r"), &["--batch", "0"])), 2);
    assert_eq!(code(&gnnbench(&["analyze", "--trace", s(&missing)])), 2);
}

#[test]
fn analyze_reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), "data", &[]);
    let run = dir.path().join("run");
    assert_eq!(code(&train(&data, &run, &["--timer", "simulated"])), 0);
    let trace = run.join("trace.json");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = gnnbench(&["analyze", "--trace", s(&trace), "--out", s(out), "--latency", "1800"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["report.txt", "kernels.csv", "breakdown.csv", "roofline_v100.csv", "economics.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let report = fs::read_to_string(a.join("report.txt")).unwrap();
    assert!(report.contains("15.556"), "{report}");
    let econ = fs::read_to_string(a.join("economics.csv")).unwrap();
    assert!(econ.contains("V100,1.8e3,7.8e-1,4.5e5"), "{econ}");
}

#[test]
fn analyze_device_selection() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), "data", &[]);
    let run = dir.path().join("run");
    assert_eq!(code(&train(&data, &run, &["--epochs", "1", "--timer", "simulated"])), 0);
    let trace = run.join("trace.json");
    let o = gnnbench(&["analyze", "--trace", s(&trace), "--device", "H200", "--out", s(&dir.path().join("x"))]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("V100") && err.contains("TPU-v3-8"), "{err}");

    let all = dir.path().join("all");
    let o = gnnbench(&["analyze", "--trace", s(&trace), "--device", "all", "--out", s(&all), "--latency", "3600"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let econ = fs::read_to_string(all.join("economics.csv")).unwrap();
    assert_eq!(econ.lines().count(), 1 + 4, "{econ}");
    assert!(econ.contains("TPU-v3-8,3.6e3,8e0,2.16e6"), "{econ}");

    let catalog = dir.path().join("catalog.json");
    assert_eq!(code(&gnnbench(&["catalog", "--out", s(&catalog)])), 0);
    let text = fs::read_to_string(&catalog).unwrap().replace("\"V100\"", "\"Lab-GPU\"");
    fs::write(&catalog, text).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_gnnbench"))
        .args(["analyze", "--trace", s(&trace), "--device", "Lab-GPU", "--out", s(&dir.path().join("lab"))])
        .env("GNNBENCH_CATALOG", &catalog)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), "data", &[]);
    let run = dir.path().join("run");
    assert_eq!(code(&train(&data, &run, &["--epochs", "1"])), 0);
    for manifest in [Path::new(&data).join("run_manifest.json"), run.join("run_manifest.json")] {
        let o = gnnbench(&["replay", "--manifest", s(&manifest)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
}
