//! On-disk dataset layout:
//!
//! ```text
//! <root>/<scene>/<split>/<video_id>/frame_000000.png   (8-bit RGB, one per frame)
//! <root>/<scene>/<split>/<video_id>/*.raw              (VRAW1 alternative)
//! <root>/<scene>/<split>/<video_id>/labels.csv         (required for test)
//! ```
//!
//! Frames are read in filename order, resized to the model geometry and
//! scaled to `[0, 1]`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{parse_labels, raw, resize_bilinear, LabelSeries, VideoSequence, DEFAULT_FPS};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const LABELS_FILE: &str = "labels.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreprocessConfig {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub scene: String,
    pub split: Split,
    pub videos: Vec<PathBuf>,
    pub label_files: Vec<Option<PathBuf>>,
}

impl DatasetManifest {
    pub fn scan(root: &Path, scene: &str, split: Split) -> Result<Self> {
        let dir = root.join(scene).join(split.dir_name());
        if !dir.is_dir() {
            return Err(Error::Data(format!("dataset directory {} not found", dir.display())));
        }
        let mut videos: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        videos.sort();
        let mut label_files = Vec::with_capacity(videos.len());
        for v in &videos {
            let lf = v.join(LABELS_FILE);
            if lf.is_file() {
                label_files.push(Some(lf));
            } else if split == Split::Test {
                return Err(Error::Data(format!("test video {} has no {LABELS_FILE}", v.display())));
            } else {
                label_files.push(None);
            }
        }
        Ok(Self {
            scene: scene.to_string(),
            split,
            videos,
            label_files,
        })
    }
}

fn video_id(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn decode_png(path: &Path, pre: &PreprocessConfig) -> Result<Tensor> {
    let img = image::open(path)?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let plane = w * h;
    let raw = img.as_raw();
    let data: Vec<f64> = match pre.channels {
        1 => (0..plane)
            .map(|i| (raw[3 * i] as f64 + raw[3 * i + 1] as f64 + raw[3 * i + 2] as f64) / (3.0 * 255.0))
            .collect(),
        3 => (0..3)
            .flat_map(|c| (0..plane).map(move |i| raw[3 * i + c] as f64 / 255.0))
            .collect(),
        c => return Err(Error::Config(format!("unsupported channel count {c}"))),
    };
    resize_bilinear(&Tensor::new(vec![pre.channels, h, w], data)?, pre.height, pre.width)
}

fn adapt_channels(frame: Tensor, channels: usize) -> Result<Tensor> {
    let (c, h, w) = (frame.shape()[0], frame.shape()[1], frame.shape()[2]);
    match (c, channels) {
        (a, b) if a == b => Ok(frame),
        (3, 1) => {
            let d = frame.data();
            let plane = h * w;
            let gray = (0..plane).map(|i| (d[i] + d[plane + i] + d[2 * plane + i]) / 3.0).collect();
            Tensor::new(vec![1, h, w], gray)
        }
        (1, 3) => Tensor::new(vec![3, h, w], frame.data().repeat(3)),
        (a, b) => Err(Error::Data(format!("cannot convert {a}-channel frames to {b} channels"))),
    }
}

/// Loads every frame of one video directory.
pub fn load_video_dir(dir: &Path, pre: &PreprocessConfig) -> Result<VideoSequence> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    let pngs: Vec<&PathBuf> = files
        .iter()
        .filter(|p| {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            name.starts_with("frame_") && name.ends_with(".png")
        })
        .collect();
    let raws: Vec<&PathBuf> = files
        .iter()
        .filter(|p| p.extension().is_some_and(|e| e == "raw"))
        .collect();
    if !pngs.is_empty() && !raws.is_empty() {
        return Err(Error::Data(format!("{} mixes PNG and raw frames", dir.display())));
    }

    let mut frames: Vec<Tensor> = Vec::new();
    for p in &pngs {
        frames.push(decode_png(p, pre).map_err(|e| Error::Data(format!("{}: {e}", p.display())))?);
    }
    for p in &raws {
        let clip = raw::read_raw(p)?;
        for t in 0..clip.shape()[0] {
            let f = adapt_channels(clip.index_axis0(t)?, pre.channels)?;
            frames.push(resize_bilinear(&f, pre.height, pre.width)?);
        }
    }
    if frames.is_empty() {
        return Err(Error::Data(format!("no frames found in {}", dir.display())));
    }
    let stacked = Tensor::stack(&frames)?;
    // bilinear weights are convex, but guard against values just outside [0, 1]
    let stacked = stacked.map(|v| v.clamp(0.0, 1.0));
    VideoSequence::new(video_id(dir), stacked, DEFAULT_FPS)
}

/// Loads a scene split in manifest order.
pub fn load_dataset(
    root: &Path,
    scene: &str,
    split: Split,
    pre: &PreprocessConfig,
) -> Result<Vec<(VideoSequence, Option<LabelSeries>)>> {
    let manifest = DatasetManifest::scan(root, scene, split)?;
    manifest
        .videos
        .iter()
        .zip(&manifest.label_files)
        .map(|(dir, lf)| {
            let video = load_video_dir(dir, pre)?;
            let labels = match lf {
                Some(p) => {
                    let l = parse_labels(p)?;
                    if l.len() != video.len() {
                        return Err(Error::Data(format!(
                            "{}: {} labels for {} frames",
                            dir.display(),
                            l.len(),
                            video.len()
                        )));
                    }
                    Some(l)
                }
                None => None,
            };
            Ok((video, labels))
        })
        .collect()
}

/// Writes one video directory in the raw layout (`video.raw` plus optional labels).
pub fn write_video_dir(dir: &Path, video: &VideoSequence, labels: Option<&LabelSeries>) -> Result<()> {
    fs::create_dir_all(dir)?;
    raw::write_raw(&dir.join("video.raw"), video.frames())?;
    if let Some(l) = labels {
        crate::data::write_labels(&dir.join(LABELS_FILE), l)?;
    }
    Ok(())
}
