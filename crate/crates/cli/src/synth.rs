use std::fs;
use std::ops::Range;
use std::path::PathBuf;

use andt::data::{parse_spans, synth_moving_dot, write_video_dir, SynthConfig};
use clap::Args;
use serde::Serialize;

use crate::config::DEFAULT_SCENE;
use crate::failure::{CmdResult, Failure};

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Dataset root to create.
    #[arg(long)]
    pub out: PathBuf,
    /// Frames per video.
    #[arg(long, default_value_t = 128)]
    pub frames: usize,
    /// Reversed-motion spans in the test videos, e.g. "40..60,90..100".
    /// Defaults to one span covering the third quarter of each video.
    #[arg(long)]
    pub anomaly_spans: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Frame side in pixels.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = 1)]
    pub channels: usize,
    #[arg(long, default_value_t = 8.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 1)]
    pub train_videos: usize,
    #[arg(long, default_value_t = 1)]
    pub test_videos: usize,
    #[arg(long, default_value = DEFAULT_SCENE)]
    pub scene: String,
}

#[derive(Serialize)]
struct SynthManifest<'a> {
    seed: u64,
    train: &'a [SynthConfig],
    test: &'a [SynthConfig],
}

fn default_spans(frames: usize) -> Vec<Range<usize>> {
    let start = frames / 2;
    vec![start..(start + (frames / 4).max(1)).min(frames)]
}

/// Writes normal training videos and labeled test videos. All videos share
/// the seed-derived starting position, so every frame lies on the same
/// closed trajectory and only the direction of motion differs.
pub fn run(args: &SynthArgs) -> CmdResult {
    if args.frames == 0 {
        return Err(Failure::Usage("--frames must be at least 1".into()));
    }
    if args.size == 0 || args.train_videos == 0 || args.test_videos == 0 {
        return Err(Failure::Usage("--size, --train-videos and --test-videos must be positive".into()));
    }
    let spans = match &args.anomaly_spans {
        Some(s) => parse_spans(s)?,
        None => default_spans(args.frames),
    };
    let base = SynthConfig {
        size: args.size,
        channels: args.channels,
        radius: args.radius,
        frames: args.frames,
        seed: args.seed,
        ..SynthConfig::default()
    };
    let start = base.resolved_start();
    let make = |i: usize, spans: Vec<Range<usize>>| SynthConfig {
        id: format!("video_{i:03}"),
        start: Some(start),
        anomaly_spans: spans,
        ..base.clone()
    };
    let train: Vec<SynthConfig> = (0..args.train_videos).map(|i| make(i, Vec::new())).collect();
    let test: Vec<SynthConfig> = (0..args.test_videos).map(|i| make(i, spans.clone())).collect();

    let scene = args.out.join(&args.scene);
    for (split, configs, labeled) in [("train", &train, false), ("test", &test, true)] {
        for cfg in configs {
            let (video, labels) = synth_moving_dot(cfg)?;
            write_video_dir(&scene.join(split).join(&cfg.id), &video, labeled.then_some(&labels))?;
        }
    }
    let manifest = SynthManifest {
        seed: args.seed,
        train: &train,
        test: &test,
    };
    fs::write(scene.join("synth.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    println!(
        "wrote {} train and {} test videos of {} frames to {}",
        train.len(),
        test.len(),
        args.frames,
        scene.display()
    );
    Ok(())
}
