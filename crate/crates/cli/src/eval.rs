use std::fs;
use std::path::PathBuf;

use andt::data::{load_dataset, PreprocessConfig, Split};
use andt::evaluation::{
    build_report, features_csv, roc_csv, score_curve_svg, score_video, scores_csv, EvalOptions, ScoredVideo,
};
use andt::training::{load_checkpoint, TrainMode};
use clap::Args;
use serde_json::json;

use crate::config::DEFAULT_SCENE;
use crate::failure::{CmdResult, Failure};

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset root with `train` (for the threshold) and labeled `test` splits.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Scoring mode; must match the mode the checkpoint was trained with.
    #[arg(long)]
    pub mode: Option<TrainMode>,
    /// Also report one AUC per test video and their mean.
    #[arg(long)]
    pub per_video_auc: bool,
    /// Min-max normalize each video's scores before computing metrics.
    #[arg(long)]
    pub normalize: bool,
    /// Scene directory under the dataset root; defaults to the checkpoint's.
    #[arg(long)]
    pub scene: Option<String>,
    /// Clips per inference batch.
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
}

pub fn run(args: &EvalArgs) -> CmdResult {
    let ckpt = load_checkpoint(&args.checkpoint)
        .map_err(|e| Failure::Usage(format!("{}: {e}", args.checkpoint.display())))?;
    let trained = ckpt.train.mode;
    let mode = args.mode.unwrap_or(trained);
    if mode != trained {
        return Err(Failure::Usage(format!(
            "checkpoint was trained for {trained}, cannot score in {mode} mode"
        )));
    }
    if !args.data.is_dir() {
        return Err(Failure::Usage(format!("data directory {} does not exist", args.data.display())));
    }
    let scene = args
        .scene
        .clone()
        .or_else(|| ckpt.metadata.get("scene").and_then(|s| s.as_str()).map(String::from))
        .unwrap_or_else(|| DEFAULT_SCENE.into());
    let fingerprint = ckpt
        .metadata
        .get("config_fingerprint")
        .and_then(|s| s.as_str())
        .map(String::from)
        .unwrap_or_else(|| ckpt.history.config_fingerprint.clone());
    let cfg = &ckpt.model;
    let pre = PreprocessConfig {
        height: cfg.height,
        width: cfg.width,
        channels: cfg.channels,
    };

    let score_split = |split: Split| -> Result<Vec<ScoredVideo>, Failure> {
        let set = load_dataset(&args.data, &scene, split, &pre)?;
        set.iter()
            .map(|(v, l)| Ok(score_video(&ckpt.params, cfg, mode, v, l.as_ref(), args.batch_size)?))
            .collect()
    };
    let train = score_split(Split::Train)?;
    let test = score_split(Split::Test)?;
    let opts = EvalOptions {
        per_video_auc: args.per_video_auc,
        normalize: args.normalize,
    };
    let train_series: Vec<_> = train.iter().map(|s| s.series.clone()).collect();
    let test_series: Vec<_> = test.iter().map(|s| s.series.clone()).collect();
    let (report, curve) = build_report(&test_series, &train_series, mode, opts, &fingerprint)?;

    fs::create_dir_all(&args.out)?;
    for s in &test_series {
        fs::write(args.out.join(format!("scores_{}.csv", s.video_id)), scores_csv(s))?;
        let shown = if args.normalize { s.min_max_normalized() } else { s.clone() };
        fs::write(
            args.out.join(format!("curve_{}.svg", s.video_id)),
            score_curve_svg(&shown, Some(report.threshold)),
        )?;
    }
    let roc = curve.as_ref().map(roc_csv).unwrap_or_else(|| "threshold,fpr,tpr\n".into());
    fs::write(args.out.join("roc.csv"), roc)?;
    fs::write(args.out.join("features.csv"), features_csv(&test)?)?;
    fs::write(args.out.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    let resolved = json!({
        "model": cfg,
        "train": ckpt.train,
        "data": { "root": args.data, "scene": scene },
        "eval": { "mode": mode, "per_video_auc": args.per_video_auc, "normalize": args.normalize, "batch_size": args.batch_size },
        "checkpoint": args.checkpoint,
        "config_fingerprint": fingerprint,
    });
    fs::write(args.out.join("resolved_config.json"), serde_json::to_string_pretty(&resolved)? + "\n")?;

    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into());
    println!(
        "AUC {}  Δs {}  recall {:.4}  precision {:.4}  F1 {:.4}  OA {:.4}  threshold {:.6}",
        fmt(report.auc),
        fmt(report.delta_s),
        report.recall,
        report.precision,
        report.f1,
        report.oa,
        report.threshold
    );
    if let Some(reason) = &report.auc_reason {
        println!("AUC undefined: {reason}");
    }
    Ok(())
}
