use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn andt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_andt")).args(args).output().expect("spawn andt")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tiny_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/tiny.json")
}

/// 8×8 dataset matching the tiny config.
fn tiny_data(root: &Path, spans: &str) {
    let out = andt(&[
        "synth", "--out", s(root), "--frames", "24", "--size", "8", "--radius", "2", "--seed", "1",
        "--anomaly-spans", spans, "--test-videos", "2",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

fn train_tiny(data: &Path, out: &Path) -> Output {
    andt(&["train", "--config", s(&tiny_config()), "--data", s(data), "--out", s(out)])
}

#[test]
fn synth_default_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = andt(&["synth", "--out", s(dir.path()), "--frames", "16", "--size", "16"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let scene = dir.path().join("moving_dot");
    assert!(scene.join("train/video_000/video.raw").is_file());
    assert!(!scene.join("train/video_000/labels.csv").exists());
    let labels = fs::read_to_string(scene.join("test/video_000/labels.csv")).unwrap();
    assert!(labels.starts_with("frame_index,label\n"));
    assert_eq!(labels.lines().count(), 17);
    assert!(labels.lines().any(|l| l.ends_with(",1")));
}

#[test]
fn synth_is_byte_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        assert_eq!(code(&andt(&["synth", "--out", s(d.path()), "--frames", "12", "--size", "12", "--seed", "9"])), 0);
    }
    for split in ["train", "test"] {
        let rel = format!("moving_dot/{split}/video_000/video.raw");
        assert_eq!(fs::read(a.path().join(&rel)).unwrap(), fs::read(b.path().join(&rel)).unwrap());
    }
}

#[test]
fn synth_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&andt(&["synth", "--out", s(dir.path()), "--frames", "0"])), 2);
    assert_eq!(code(&andt(&["synth", "--out", s(dir.path()), "--anomaly-spans", "5-9"])), 2);
    assert_eq!(code(&andt(&["synth", "--out", s(dir.path()), "--frames", "10", "--anomaly-spans", "8..12"])), 2);
    assert_eq!(code(&andt(&["synth"])), 2);
}

#[test]
fn train_writes_outputs_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    tiny_data(&data, "10..16");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let res = train_tiny(&data, out);
        assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    }
    assert_eq!(fs::read(a.join("checkpoint.andt")).unwrap(), fs::read(b.join("checkpoint.andt")).unwrap());
    let resolved_without_out = |dir: &Path| {
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.join("resolved_config.json")).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("out");
        v
    };
    assert_eq!(resolved_without_out(&a), resolved_without_out(&b));

    let history = fs::read_to_string(a.join("history.csv")).unwrap();
    let mut lines = history.lines();
    assert_eq!(lines.next(), Some("epoch,loss,wall_time_s"));
    let losses: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(losses.len(), 5);
    assert!(losses.last().unwrap() < losses.first().unwrap());

    let resolved: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("resolved_config.json")).unwrap()).unwrap();
    assert_eq!(resolved["model"]["embed_dim"], 8);
    assert_eq!(resolved["config_fingerprint"].as_str().unwrap().len(), 64);
}

#[test]
fn train_usage_and_numeric_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    assert_eq!(code(&train_tiny(&missing, &dir.path().join("o1"))), 2);

    let data = dir.path().join("data");
    tiny_data(&data, "10..16");
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"model": {"embed_dim": 8, "colour": 1}}"#).unwrap();
    assert_eq!(code(&andt(&["train", "--config", s(&bad), "--data", s(&data), "--out", s(&dir.path().join("o2"))])), 2);
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(code(&andt(&["train", "--config", s(&bad), "--data", s(&data), "--out", s(&dir.path().join("o3"))])), 2);

    let mut cfg: serde_json::Value = serde_json::from_str(&fs::read_to_string(tiny_config()).unwrap()).unwrap();
    cfg["train"]["learning_rate"] = serde_json::json!(1e300);
    let huge = dir.path().join("huge.json");
    fs::write(&huge, cfg.to_string()).unwrap();
    let out = andt(&["train", "--config", s(&huge), "--data", s(&data), "--out", s(&dir.path().join("o4"))]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn eval_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    tiny_data(&data, "10..16");
    let model = dir.path().join("model");
    assert_eq!(code(&train_tiny(&data, &model)), 0);
    let ckpt = model.join("checkpoint.andt");

    let run = |out: &Path, extra: &[&str]| {
        let mut args = vec!["eval", "--checkpoint", s(&ckpt), "--data", s(&data), "--out", s(out)];
        args.extend_from_slice(extra);
        andt(&args)
    };
    let out = dir.path().join("eval");
    let res = run(&out, &["--per-video-auc"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    for f in [
        "report.json", "roc.csv", "features.csv", "resolved_config.json", "scores_video_000.csv",
        "scores_video_001.csv", "curve_video_000.svg", "curve_video_001.svg",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    for key in ["auc", "recall", "precision", "f1", "oa", "delta_s", "threshold", "counts", "config_fingerprint"] {
        assert!(!report[key].is_null(), "{key} missing from report");
    }
    assert_eq!(report["per_video"].as_array().unwrap().len(), 2);

    let scores = fs::read_to_string(out.join("scores_video_000.csv")).unwrap();
    assert!(scores.starts_with("frame_index,score,label,backfilled\n"));
    assert_eq!(scores.lines().count(), 25);
    let features = fs::read_to_string(out.join("features.csv")).unwrap();
    let header = features.lines().next().unwrap();
    assert!(header.starts_with("frame_index,label,p_0,") && header.ends_with("p_7,pc1,pc2,pc3"));
    assert!(fs::read_to_string(out.join("roc.csv")).unwrap().starts_with("threshold,fpr,tpr\n"));
    assert!(fs::read_to_string(out.join("curve_video_000.svg")).unwrap().starts_with("<svg"));

    let again = dir.path().join("eval2");
    assert_eq!(code(&run(&again, &["--per-video-auc"])), 0);
    for f in ["report.json", "roc.csv", "features.csv", "scores_video_001.csv", "curve_video_001.svg"] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f} differs on rerun");
    }

    let res = run(&dir.path().join("eval3"), &["--mode", "reconstruction-1"]);
    assert_eq!(code(&res), 2);
    let res = run(&dir.path().join("eval4"), &["--scene", "elsewhere"]);
    assert_eq!(code(&res), 2);
}

#[test]
fn eval_on_single_class_reports_null_auc() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    tiny_data(&data, "");
    let model = dir.path().join("model");
    assert_eq!(code(&train_tiny(&data, &model)), 0);
    let out = dir.path().join("eval");
    let res = andt(&[
        "eval", "--checkpoint", s(&model.join("checkpoint.andt")), "--data", s(&data), "--out", s(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report["auc"].is_null());
    assert!(report["auc_reason"].as_str().is_some_and(|r| !r.is_empty()));
    assert!(report["msre"].as_f64().is_some());
    assert!(report["fpr"].as_f64().is_some());
    assert_eq!(fs::read_to_string(out.join("roc.csv")).unwrap(), "threshold,fpr,tpr\n");
}

#[test]
fn gradcheck_exit_codes_and_coverage() {
    let ok = andt(&["gradcheck"]);
    assert_eq!(code(&ok), 0);
    let table = String::from_utf8_lossy(&ok.stdout);
    for op in andt::numerics::suite::OPERATORS.iter().chain(&["full_model"]) {
        let rows = table.lines().filter(|l| l.split_whitespace().next() == Some(op)).count();
        assert_eq!(rows, 1, "{op} listed {rows} times");
    }

    let strict = andt(&["gradcheck", "--tolerance", "1e-12"]);
    assert_eq!(code(&strict), 1);
    let listed = String::from_utf8_lossy(&strict.stderr);
    assert!(listed.contains("gradient mismatch in:") && listed.contains("full_model"));
    assert_eq!(code(&andt(&["gradcheck", "--tolerance", "-1"])), 2);
}
