use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum TrainMode {
    /// `T` frames in, the next frame out.
    #[default]
    #[serde(rename = "prediction-1")]
    Prediction1,
    /// The last clip frame repeated `T` times in, that frame out.
    #[serde(rename = "reconstruction-1")]
    Reconstruction1,
    /// `T` frames in, the same `T` frames out.
    #[serde(rename = "reconstruction-6")]
    Reconstruction6,
}

impl TrainMode {
    pub const ALL: [TrainMode; 3] = [TrainMode::Prediction1, TrainMode::Reconstruction1, TrainMode::Reconstruction6];

    pub fn as_str(self) -> &'static str {
        match self {
            TrainMode::Prediction1 => "prediction-1",
            TrainMode::Reconstruction1 => "reconstruction-1",
            TrainMode::Reconstruction6 => "reconstruction-6",
        }
    }

    /// Frames the decoder must emit for clips of `frames` inputs.
    pub fn output_frames(self, frames: usize) -> usize {
        match self {
            TrainMode::Reconstruction6 => frames,
            _ => 1,
        }
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TrainMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode `{s}`, expected prediction-1, reconstruction-1 or reconstruction-6")))
    }
}

/// Storage precision of the parameters. Arithmetic is always 64-bit; with
/// `F32` every parameter is rounded to the nearest `f32` after each update
/// and checkpointed as `f32`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Frames between consecutive training windows.
    pub stride: usize,
    pub seed: u64,
    pub precision: Precision,
    /// Global gradient-norm ceiling; off when `None`.
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: TrainMode::Prediction1,
            learning_rate: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 4,
            epochs: 10,
            stride: 1,
            seed: 0,
            precision: Precision::F64,
            grad_clip: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 || self.stride == 0 {
            return bad("batch_size and stride must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return bad("adam_eps must be positive");
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0 && c.is_finite()) {
                return bad("grad_clip must be positive");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_names_round_trip() {
        for m in TrainMode::ALL {
            assert_eq!(m.as_str().parse::<TrainMode>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{m}\""));
        }
        assert!("prediction-2".parse::<TrainMode>().is_err());
        assert_eq!(TrainMode::Reconstruction6.output_frames(6), 6);
        assert_eq!(TrainMode::Reconstruction1.output_frames(6), 1);
    }

    #[test]
    fn validation() {
        TrainConfig::default().validate().unwrap();
        assert!(TrainConfig { learning_rate: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { epochs: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { grad_clip: Some(-1.0), ..Default::default() }.validate().is_err());
        assert!(serde_json::from_str::<TrainConfig>(r#"{"lr": 1.0}"#).is_err());
    }
}
