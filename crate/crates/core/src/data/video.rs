use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const DEFAULT_FPS: f64 = 30.0;

/// Ordered frames `T_total×C×H×W` with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSequence {
    pub id: String,
    frames: Tensor,
    pub fps: f64,
}

impl VideoSequence {
    pub fn new(id: impl Into<String>, frames: Tensor, fps: f64) -> Result<Self> {
        let [_, c, _, _] = *frames.shape() else {
            return Err(Error::Data(format!("video frames must be T×C×H×W, got {:?}", frames.shape())));
        };
        if c != 1 && c != 3 {
            return Err(Error::Data(format!("video must have 1 or 3 channels, got {c}")));
        }
        if let Some(v) = frames.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Data(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self {
            id: id.into(),
            frames,
            fps,
        })
    }

    pub fn frames(&self) -> &Tensor {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(C, H, W)`
    pub fn frame_shape(&self) -> (usize, usize, usize) {
        let s = self.frames.shape();
        (s[1], s[2], s[3])
    }

    fn frame_len(&self) -> usize {
        let (c, h, w) = self.frame_shape();
        c * h * w
    }

    pub fn frame(&self, index: usize) -> Result<Tensor> {
        self.frames.index_axis0(index)
    }

    /// Frames `[start, start + count)` as a `count×C×H×W` clip.
    pub fn clip(&self, start: usize, count: usize) -> Result<Tensor> {
        if count == 0 || start + count > self.len() {
            return Err(Error::Shape(format!(
                "clip [{start}, {}) outside video of {} frames",
                start + count,
                self.len()
            )));
        }
        let n = self.frame_len();
        let (c, h, w) = self.frame_shape();
        Tensor::new(
            vec![count, c, h, w],
            self.frames.data()[start * n..(start + count) * n].to_vec(),
        )
    }
}

/// Per-frame binary anomaly labels (1 = anomalous).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSeries {
    labels: Vec<u8>,
}

impl LabelSeries {
    pub fn new(labels: Vec<u8>) -> Result<Self> {
        if let Some(v) = labels.iter().find(|&&v| v > 1) {
            return Err(Error::Data(format!("label {v} is not 0 or 1")));
        }
        Ok(Self { labels })
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn anomalous_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }
}
