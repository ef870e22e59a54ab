use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{window_starts, ClipWindow, VideoSequence};
use crate::error::{Error, Result};
use crate::model::{bind_weights, forward_on_tape, init_params, tokenize_batch, ModelConfig, ModelParams, Phase};
use crate::numerics::ops::{channel_moments, MeanSquaredError};
use crate::numerics::{Tape, Tensor};
use crate::training::{
    adam_update, build_target, clip_global_norm, AdamConfig, OptimizerState, Precision, TrainConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainHistory {
    /// Mean batch loss of each epoch, weighted by batch size.
    pub epoch_loss: Vec<f64>,
    /// Seconds per epoch. Not persisted, so reruns produce identical checkpoints.
    #[serde(skip)]
    pub wall_time_s: Vec<f64>,
    pub config_fingerprint: String,
}

/// Hex SHA-256 of the canonical (key-sorted) JSON form of `value`.
pub fn config_fingerprint(value: &impl Serialize) -> Result<String> {
    let canonical = serde_json::to_vec(&serde_json::to_value(value)?)?;
    Ok(Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect())
}

fn round_to_f32(params: &mut ModelParams) {
    for t in params.weights.values_mut() {
        for v in t.data_mut() {
            *v = *v as f32 as f64;
        }
    }
}

/// Parameters, optimizer state and history of one training run.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub params: ModelParams,
    pub optimizer: OptimizerState,
    pub history: TrainHistory,
}

impl Trainer {
    /// Fresh parameters drawn from `model.seed`.
    pub fn new(model: ModelConfig, train: TrainConfig) -> Result<Self> {
        model.validate()?;
        train.validate()?;
        let mut params = init_params(&model, model.seed)?;
        if train.precision == Precision::F32 {
            round_to_f32(&mut params);
        }
        let optimizer = OptimizerState::zeros_like(&params.weights);
        let config_fingerprint = config_fingerprint(&(&model, &train))?;
        Ok(Self {
            model,
            train,
            params,
            optimizer,
            history: TrainHistory {
                config_fingerprint,
                ..TrainHistory::default()
            },
        })
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.train.learning_rate,
            beta1: self.train.beta1,
            beta2: self.train.beta2,
            eps: self.train.adam_eps,
        }
    }

    /// Loss and gradients of a batch without touching any state.
    pub fn loss_and_grads(
        &self,
        inputs: &[&Tensor],
        targets: &[&Tensor],
    ) -> Result<(f64, crate::model::Weights<Tensor>, Vec<Tensor>)> {
        let tokens = tokenize_batch(inputs, &self.model.grid()?)?;
        let target = Tensor::stack(&targets.iter().map(|t| (*t).clone()).collect::<Vec<_>>())?;
        let mut tape = Tape::new();
        let w = bind_weights(&mut tape, &self.params.weights);
        let g = forward_on_tape(&mut tape, &w, &self.params.running, &self.model, tokens, Phase::Train)?;
        let target = tape.leaf(target);
        let loss = tape.apply(MeanSquaredError, &[g.prediction, target])?;
        let value = tape.value(loss).data()[0];
        if !value.is_finite() {
            return Err(Error::Numeric("loss is not finite".into()));
        }
        let grads = tape.backward(loss, Tensor::scalar(1.0))?;
        let gw = w.map(|_, &v| grads.get_or_zeros(v, tape.value(v)));
        let bn_inputs = g.bn_inputs.iter().map(|&v| tape.value(v).clone()).collect();
        Ok((value, gw, bn_inputs))
    }

    /// One optimizer step on a batch; returns the loss before the update.
    pub fn step(&mut self, inputs: &[&Tensor], targets: &[&Tensor]) -> Result<f64> {
        let (loss, mut grads, bn_inputs) = self.loss_and_grads(inputs, targets)?;
        for (running, x) in self.params.running.iter_mut().zip(&bn_inputs) {
            running.update(&channel_moments(x)?, self.model.bn_momentum);
        }
        if let Some(max) = self.train.grad_clip {
            clip_global_norm(&mut grads, max);
        }
        let adam = self.adam();
        adam_update(&mut self.params.weights, &grads, &mut self.optimizer, &adam)?;
        if self.train.precision == Precision::F32 {
            round_to_f32(&mut self.params);
        }
        Ok(loss)
    }

    /// Runs `train.epochs` epochs over every window of `videos`.
    pub fn fit(&mut self, videos: &[VideoSequence]) -> Result<()> {
        let t = self.model.frames;
        let mut items = Vec::new();
        for (vi, v) in videos.iter().enumerate() {
            if v.frame_shape() != (self.model.channels, self.model.height, self.model.width) {
                return Err(Error::Config(format!(
                    "video {} has frames {:?}, model expects {}×{}×{}",
                    v.id,
                    v.frame_shape(),
                    self.model.channels,
                    self.model.height,
                    self.model.width
                )));
            }
            items.extend(window_starts(v.len(), t, self.train.stride)?.into_iter().map(|s| (vi, s)));
        }
        if items.is_empty() {
            return Err(Error::Data(format!("no training windows: every video is at most {t} frames long")));
        }
        let first_epoch = self.history.epoch_loss.len();
        for epoch in first_epoch..first_epoch + self.train.epochs {
            let started = Instant::now();
            let mut order = items.clone();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(self.train.seed.wrapping_add(epoch as u64)));
            let mut total = 0.0;
            for (b, chunk) in order.chunks(self.train.batch_size).enumerate() {
                let mut inputs = Vec::with_capacity(chunk.len());
                let mut targets = Vec::with_capacity(chunk.len());
                for &(vi, start) in chunk {
                    let v = &videos[vi];
                    let window = ClipWindow {
                        clip: v.clip(start, t)?,
                        target: v.frame(start + t)?,
                        start,
                        target_index: start + t,
                    };
                    let (i, tg) = build_target(&window, self.train.mode, &self.model)?;
                    inputs.push(i);
                    targets.push(tg);
                }
                let loss = self
                    .step(&inputs.iter().collect::<Vec<_>>(), &targets.iter().collect::<Vec<_>>())
                    .map_err(|e| match e {
                        Error::Numeric(m) => Error::Numeric(format!("epoch {epoch}, batch {b}: {m}")),
                        other => other,
                    })?;
                total += loss * chunk.len() as f64;
            }
            let mean = total / order.len() as f64;
            self.history.epoch_loss.push(mean);
            self.history.wall_time_s.push(started.elapsed().as_secs_f64());
            log::info!("epoch {epoch}: loss {mean:.6}");
        }
        Ok(())
    }
}

/// Trains a fresh model on the normal videos in `videos`.
pub fn fit(videos: &[VideoSequence], model: &ModelConfig, train: &TrainConfig) -> Result<Trainer> {
    let mut trainer = Trainer::new(model.clone(), train.clone())?;
    trainer.fit(videos)?;
    Ok(trainer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_moving_dot, SynthConfig};

    fn tiny_video(frames: usize) -> VideoSequence {
        let cfg = SynthConfig { size: 8, radius: 1.5, frames, velocity: (1.0, 1.0), seed: 2, ..SynthConfig::default() };
        synth_moving_dot(&cfg).unwrap().0
    }

    #[test]
    fn fingerprint_is_stable_hex() {
        let a = config_fingerprint(&ModelConfig::tiny()).unwrap();
        assert_eq!(a.len(), 64);
        assert_eq!(a, config_fingerprint(&ModelConfig::tiny()).unwrap());
        assert_ne!(a, config_fingerprint(&ModelConfig::default()).unwrap());
    }

    #[test]
    fn too_short_videos_error() {
        let tc = TrainConfig { epochs: 1, ..TrainConfig::default() };
        let err = fit(&[tiny_video(2)], &ModelConfig::tiny(), &tc).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn same_seed_same_params() {
        let tc = TrainConfig { epochs: 2, batch_size: 3, learning_rate: 1e-3, ..TrainConfig::default() };
        let v = [tiny_video(10)];
        let a = fit(&v, &ModelConfig::tiny(), &tc).unwrap();
        let b = fit(&v, &ModelConfig::tiny(), &tc).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.history.epoch_loss, b.history.epoch_loss);
        assert_eq!(a.optimizer.step, 6);
    }

    #[test]
    fn f32_precision_keeps_params_representable() {
        let tc = TrainConfig { epochs: 1, precision: Precision::F32, ..TrainConfig::default() };
        let t = fit(&[tiny_video(6)], &ModelConfig::tiny(), &tc).unwrap();
        for w in t.params.weights.values() {
            assert!(w.data().iter().all(|&v| v == v as f32 as f64));
        }
    }
}
