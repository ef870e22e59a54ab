use crate::data::VideoSequence;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// `frames` input frames followed by the frame to predict.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipWindow {
    /// `T×C×H×W`
    pub clip: Tensor,
    /// `C×H×W`
    pub target: Tensor,
    pub start: usize,
    /// Always `start + T`.
    pub target_index: usize,
}

/// Window start indices: `0, stride, 2·stride, …` while a target frame
/// remains, i.e. `⌊(total − frames − 1) / stride⌋ + 1` windows.
pub fn window_starts(total: usize, frames: usize, stride: usize) -> Result<Vec<usize>> {
    if stride == 0 || frames == 0 {
        return Err(Error::Config("window length and stride must be positive".into()));
    }
    if total <= frames {
        return Ok(Vec::new());
    }
    Ok((0..total - frames).step_by(stride).collect())
}

pub fn window_clips(seq: &VideoSequence, frames: usize, stride: usize) -> Result<Vec<ClipWindow>> {
    let starts = window_starts(seq.len(), frames, stride)?;
    if starts.is_empty() {
        log::warn!(
            "video {} has {} frames, too short for {frames}-frame clips",
            seq.id,
            seq.len()
        );
    }
    starts
        .into_iter()
        .map(|start| {
            Ok(ClipWindow {
                clip: seq.clip(start, frames)?,
                target: seq.frame(start + frames)?,
                start,
                target_index: start + frames,
            })
        })
        .collect()
}
