use crate::data::ClipWindow;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::numerics::ops::MeanSquaredError;
use crate::numerics::{DifferentiableOp, Tensor};
use crate::training::TrainMode;

/// Mean over elements of `(pred − target)²`.
pub fn prediction_loss(pred: &Tensor, target: &Tensor) -> Result<f64> {
    Ok(MeanSquaredError.forward(&[pred, target])?.data()[0])
}

/// `T` copies of `frame` stacked into `T×C×H×W`.
pub fn repeat_frame(frame: &Tensor, times: usize) -> Result<Tensor> {
    Tensor::stack(&vec![frame.clone(); times])
}

/// Model input and loss target for one window.
///
/// The target is `(C·O)×H×W`: the next frame, the repeated frame itself,
/// or the `T` input frames stacked along channels.
pub fn build_target(window: &ClipWindow, mode: TrainMode, cfg: &ModelConfig) -> Result<(Tensor, Tensor)> {
    let t = window.clip.shape()[0];
    if t != cfg.frames {
        return Err(Error::Config(format!("window has {t} frames, model expects {}", cfg.frames)));
    }
    if cfg.output_frames != mode.output_frames(cfg.frames) {
        return Err(Error::Config(format!(
            "mode {mode} needs output_frames = {}, model has {}",
            mode.output_frames(cfg.frames),
            cfg.output_frames
        )));
    }
    match mode {
        TrainMode::Prediction1 => Ok((window.clip.clone(), window.target.clone())),
        TrainMode::Reconstruction1 => {
            let last = window.clip.index_axis0(t - 1)?;
            Ok((repeat_frame(&last, t)?, last))
        }
        TrainMode::Reconstruction6 => {
            let s = window.clip.shape();
            let stacked = window.clip.clone().reshape(vec![s[0] * s[1], s[2], s[3]])?;
            Ok((window.clip.clone(), stacked))
        }
    }
}
