use crate::data::{LabelSeries, VideoSequence};
use crate::error::{Error, Result};
use crate::model::{predict_batch, ModelConfig, ModelParams};
use crate::numerics::Tensor;
use crate::training::{prediction_loss, repeat_frame, TrainMode};

/// Per-frame anomaly scores of one video.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    pub video_id: String,
    /// Mean squared prediction error per frame, aligned with the video.
    pub scores: Vec<f64>,
    pub labels: Option<Vec<u8>>,
    /// Frames without enough history, filled with the first computed score.
    pub backfilled: Vec<bool>,
}

impl ScoreSeries {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Scores and labels of the frames that were actually predicted.
    pub fn scored(&self) -> (Vec<f64>, Vec<u8>) {
        let labels = self.labels.clone().unwrap_or_else(|| vec![0; self.scores.len()]);
        self.scores
            .iter()
            .zip(&labels)
            .zip(&self.backfilled)
            .filter(|(_, &b)| !b)
            .map(|((&s, &l), _)| (s, l))
            .unzip()
    }

    /// Min-max rescales the scores of this video to `[0, 1]`; a constant
    /// series maps to zeros.
    pub fn min_max_normalized(&self) -> Self {
        let (lo, hi) = self
            .scores
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)));
        let span = hi - lo;
        Self {
            scores: self
                .scores
                .iter()
                .map(|&s| if span > 0.0 { (s - lo) / span } else { 0.0 })
                .collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredVideo {
    pub series: ScoreSeries,
    /// `(frame index, encoder feature p)` for every predicted frame.
    pub features: Vec<(usize, Vec<f64>)>,
}

/// First frame index with enough history to be scored.
pub fn first_scored_frame(mode: TrainMode, frames: usize) -> usize {
    match mode {
        TrainMode::Prediction1 => frames,
        TrainMode::Reconstruction1 => 0,
        TrainMode::Reconstruction6 => frames - 1,
    }
}

fn model_io(video: &VideoSequence, mode: TrainMode, t: usize, i: usize) -> Result<(Tensor, Tensor)> {
    match mode {
        TrainMode::Prediction1 => Ok((video.clip(i - t, t)?, video.frame(i)?)),
        TrainMode::Reconstruction1 => {
            let f = video.frame(i)?;
            Ok((repeat_frame(&f, t)?, f))
        }
        TrainMode::Reconstruction6 => {
            let clip = video.clip(i + 1 - t, t)?;
            let s = clip.shape().to_vec();
            let target = clip.clone().reshape(vec![s[0] * s[1], s[2], s[3]])?;
            Ok((clip, target))
        }
    }
}

/// Scores every frame of `video` with inference-mode batch norm.
pub fn score_video(
    params: &ModelParams,
    cfg: &ModelConfig,
    mode: TrainMode,
    video: &VideoSequence,
    labels: Option<&LabelSeries>,
    batch_size: usize,
) -> Result<ScoredVideo> {
    let t = cfg.frames;
    if cfg.output_frames != mode.output_frames(t) {
        return Err(Error::Config(format!("checkpoint decoder emits {} frames, mode {mode} needs {}", cfg.output_frames, mode.output_frames(t))));
    }
    if video.frame_shape() != (cfg.channels, cfg.height, cfg.width) {
        return Err(Error::Config(format!(
            "video {} frames are {:?}, model expects {}×{}×{}",
            video.id,
            video.frame_shape(),
            cfg.channels,
            cfg.height,
            cfg.width
        )));
    }
    if let Some(l) = labels {
        if l.len() != video.len() {
            return Err(Error::Data(format!("video {}: {} labels for {} frames", video.id, l.len(), video.len())));
        }
    }
    let first = first_scored_frame(mode, t);
    if video.len() <= first {
        return Err(Error::Data(format!(
            "video {} has {} frames; mode {mode} with T={t} needs more than {first}",
            video.id,
            video.len()
        )));
    }

    let n = video.len();
    let mut scores = vec![0.0; n];
    let mut features = Vec::with_capacity(n - first);
    let indices: Vec<usize> = (first..n).collect();
    for chunk in indices.chunks(batch_size.max(1)) {
        let io = chunk.iter().map(|&i| model_io(video, mode, t, i)).collect::<Result<Vec<_>>>()?;
        let inputs: Vec<&Tensor> = io.iter().map(|(x, _)| x).collect();
        let (preds, feats) = predict_batch(&inputs, params, cfg)?;
        for (b, &i) in chunk.iter().enumerate() {
            let pred = preds.index_axis0(b)?;
            scores[i] = prediction_loss(&pred, &io[b].1)?;
            features.push((i, feats.index_axis0(b)?.into_data()));
        }
    }
    let fill = scores[first];
    scores[..first].fill(fill);
    let backfilled = (0..n).map(|i| i < first).collect();
    Ok(ScoredVideo {
        series: ScoreSeries {
            video_id: video.id.clone(),
            scores,
            labels: labels.map(|l| l.labels().to_vec()),
            backfilled,
        },
        features,
    })
}
