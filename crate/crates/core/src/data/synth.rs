//! Synthetic moving-dot videos for desk-scale verification.
//!
//! A soft disc travels over a toroidal grid with constant velocity. Inside
//! anomaly spans it travels backwards, so every anomalous frame is, taken
//! alone, indistinguishable from some normal frame; only the motion reveals
//! the anomaly.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{LabelSeries, VideoSequence, DEFAULT_FPS};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub id: String,
    /// Frame height and width.
    pub size: usize,
    pub channels: usize,
    pub radius: f64,
    /// Pixels per frame along (x, y).
    pub velocity: (f64, f64),
    /// Initial (x, y); drawn from `seed` when absent.
    pub start: Option<(f64, f64)>,
    pub frames: usize,
    /// Half-open frame ranges in which the motion is reversed.
    pub anomaly_spans: Vec<Range<usize>>,
    pub seed: u64,
}

impl SynthConfig {
    /// `start`, or the position drawn from `seed` when unset.
    pub fn resolved_start(&self) -> (f64, f64) {
        self.start.unwrap_or_else(|| {
            let size = self.size as f64;
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            (rng.random_range(0.0..size), rng.random_range(0.0..size))
        })
    }
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            id: "video_000".into(),
            size: 64,
            channels: 1,
            radius: 8.0,
            velocity: (3.0, 2.0),
            start: None,
            frames: 128,
            anomaly_spans: Vec::new(),
            seed: 0,
        }
    }
}

/// Parses `"a..b,c..d"` into half-open ranges. An empty string yields no spans.
pub fn parse_spans(spec: &str) -> Result<Vec<Range<usize>>> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Ok(Vec::new());
    }
    spec.split(',')
        .map(|part| {
            let bad = || Error::Config(format!("bad span `{part}`, expected START..END"));
            let (a, b) = part.trim().split_once("..").ok_or_else(bad)?;
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().parse().map_err(|_| bad())?;
            Ok(a..b)
        })
        .collect()
}

fn check_spans(spans: &[Range<usize>], frames: usize) -> Result<()> {
    for s in spans {
        if s.start >= s.end || s.end > frames {
            return Err(Error::Config(format!(
                "anomaly span {}..{} invalid for {frames} frames",
                s.start, s.end
            )));
        }
    }
    Ok(())
}

/// Frame ranges not covered by `spans` within `0..frames`.
pub fn complement_spans(spans: &[Range<usize>], frames: usize) -> Vec<Range<usize>> {
    let mut covered = vec![false; frames];
    for s in spans {
        covered[s.start.min(frames)..s.end.min(frames)].fill(true);
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < frames {
        if covered[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < frames && !covered[i] {
            i += 1;
        }
        out.push(start..i);
    }
    out
}

fn torus_delta(a: f64, b: f64, size: f64) -> f64 {
    let d = (a - b).abs();
    d.min(size - d)
}

pub fn synth_moving_dot(cfg: &SynthConfig) -> Result<(VideoSequence, LabelSeries)> {
    if cfg.frames == 0 || cfg.size == 0 {
        return Err(Error::Config("synthetic video needs at least one frame and pixel".into()));
    }
    if cfg.channels != 1 && cfg.channels != 3 {
        return Err(Error::Config(format!("channels must be 1 or 3, got {}", cfg.channels)));
    }
    if cfg.radius.is_nan() || cfg.radius <= 0.0 {
        return Err(Error::Config("dot radius must be positive".into()));
    }
    check_spans(&cfg.anomaly_spans, cfg.frames)?;

    let size = cfg.size as f64;
    let (mut x, mut y) = cfg.resolved_start();
    let mut labels = vec![0u8; cfg.frames];
    for s in &cfg.anomaly_spans {
        labels[s.clone()].fill(1);
    }

    let plane = cfg.size * cfg.size;
    let mut data = Vec::with_capacity(cfg.frames * cfg.channels * plane);
    for (i, &label) in labels.iter().enumerate() {
        if i > 0 {
            let dir = if label == 1 { -1.0 } else { 1.0 };
            x = (x + dir * cfg.velocity.0).rem_euclid(size);
            y = (y + dir * cfg.velocity.1).rem_euclid(size);
        }
        let mut frame = Vec::with_capacity(plane);
        for py in 0..cfg.size {
            let dy = torus_delta(py as f64, y, size);
            for px in 0..cfg.size {
                let dx = torus_delta(px as f64, x, size);
                let dist = (dx * dx + dy * dy).sqrt();
                frame.push((cfg.radius + 0.5 - dist).clamp(0.0, 1.0));
            }
        }
        for _ in 0..cfg.channels {
            data.extend_from_slice(&frame);
        }
    }
    let frames = Tensor::new(vec![cfg.frames, cfg.channels, cfg.size, cfg.size], data)?;
    Ok((
        VideoSequence::new(cfg.id.clone(), frames, DEFAULT_FPS)?,
        LabelSeries::new(labels)?,
    ))
}
