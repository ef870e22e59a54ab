use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use andt::data::{load_dataset, PreprocessConfig, Split};
use andt::training::{save_checkpoint, Checkpoint, Trainer};
use clap::Args;
use serde_json::json;

use crate::config::RunConfig;
use crate::failure::{CmdResult, Failure};

pub const CHECKPOINT_FILE: &str = "checkpoint.andt";

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON run configuration; every field is optional.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset root (overrides `data.root`).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory (overrides `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &TrainArgs) -> CmdResult {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &args.data {
        cfg.data.root = Some(d.clone());
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    let cfg = cfg.resolve()?;
    let root = cfg.data.root.clone().ok_or_else(|| Failure::Usage("no dataset given; pass --data".into()))?;
    let out = cfg.out.clone().ok_or_else(|| Failure::Usage("no output directory given; pass --out".into()))?;
    if !root.is_dir() {
        return Err(Failure::Usage(format!("data directory {} does not exist", root.display())));
    }
    let fingerprint = cfg.fingerprint()?;

    let pre = PreprocessConfig {
        height: cfg.model.height,
        width: cfg.model.width,
        channels: cfg.model.channels,
    };
    let videos: Vec<_> = load_dataset(&root, &cfg.data.scene, Split::Train, &pre)?
        .into_iter()
        .map(|(v, _)| v)
        .collect();
    log::info!("loaded {} training videos", videos.len());

    let mut trainer = Trainer::new(cfg.model.clone(), cfg.train.clone())?;
    trainer.history.config_fingerprint = fingerprint.clone();
    trainer.fit(&videos)?;

    fs::create_dir_all(&out)?;
    let metadata = json!({ "config_fingerprint": fingerprint, "scene": cfg.data.scene });
    save_checkpoint(&Checkpoint::from_trainer(&trainer, metadata), &out.join(CHECKPOINT_FILE))?;
    fs::write(out.join("history.csv"), history_csv(&trainer))?;
    write_resolved(&cfg, &fingerprint, &out)?;
    let h = &trainer.history.epoch_loss;
    println!(
        "trained {} epochs: loss {:.6} -> {:.6}; checkpoint at {}",
        h.len(),
        h.first().copied().unwrap_or(f64::NAN),
        h.last().copied().unwrap_or(f64::NAN),
        out.join(CHECKPOINT_FILE).display()
    );
    Ok(())
}

fn history_csv(t: &Trainer) -> String {
    let mut s = String::from("epoch,loss,wall_time_s\n");
    for (i, (loss, secs)) in t.history.epoch_loss.iter().zip(&t.history.wall_time_s).enumerate() {
        writeln!(s, "{i},{loss},{secs:.3}").expect("write to String");
    }
    s
}

pub fn write_resolved(cfg: &RunConfig, fingerprint: &str, out: &std::path::Path) -> CmdResult {
    let mut doc = serde_json::to_value(cfg)?;
    doc["config_fingerprint"] = json!(fingerprint);
    fs::write(out.join("resolved_config.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(())
}
