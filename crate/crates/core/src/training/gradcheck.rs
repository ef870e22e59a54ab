use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{bind_weights, forward_on_tape, init_params, tokenize_batch, ModelConfig, Phase, Weights};
use crate::numerics::ops::{MeanSquaredError, RunningStats};
use crate::numerics::{finite_diff_check, DifferentiableOp, GradCheckConfig, GradCheckReport, Tape, Tensor};

/// Training loss as a function of every parameter tensor, in
/// [`Weights::values`] order, for a fixed batch.
pub struct ModelLoss {
    pub cfg: ModelConfig,
    pub layout: Weights<Vec<usize>>,
    pub running: Vec<RunningStats>,
    /// `B×N×D`
    pub tokens: Tensor,
    /// `B×(C·O)×H×W`
    pub target: Tensor,
}

impl ModelLoss {
    fn weights(&self, inputs: &[&Tensor]) -> Result<Weights<Tensor>> {
        Weights::from_values(&self.layout, inputs.iter().map(|t| (*t).clone()).collect())
    }

    fn run(&self, inputs: &[&Tensor], seed: Option<&Tensor>) -> Result<(Tensor, Vec<Tensor>)> {
        let weights = self.weights(inputs)?;
        let mut tape = Tape::new();
        let w = bind_weights(&mut tape, &weights);
        let g = forward_on_tape(&mut tape, &w, &self.running, &self.cfg, self.tokens.clone(), Phase::Train)?;
        let target = tape.leaf(self.target.clone());
        let loss = tape.apply(MeanSquaredError, &[g.prediction, target])?;
        let value = tape.value(loss).clone();
        let Some(seed) = seed else {
            return Ok((value, Vec::new()));
        };
        let grads = tape.backward(loss, seed.clone())?;
        let per_input = w.values().into_iter().map(|&v| grads.get_or_zeros(v, tape.value(v))).collect();
        Ok((value, per_input))
    }
}

impl DifferentiableOp for ModelLoss {
    fn name(&self) -> &'static str {
        "full_model"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor> {
        Ok(self.run(inputs, None)?.0)
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, cotangent: &Tensor) -> Result<Vec<Tensor>> {
        Ok(self.run(inputs, Some(cotangent))?.1)
    }
}

/// Checks the gradient of the training loss with respect to every parameter
/// group of a randomly initialized model on a random two-clip batch.
/// Train-mode batch norm is used, so cross-sample terms are exercised.
pub fn model_gradcheck(cfg: &ModelConfig, gc: &GradCheckConfig) -> Result<(GradCheckReport, Vec<String>)> {
    cfg.validate()?;
    let params = init_params(cfg, gc.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(gc.seed.wrapping_add(1));
    // a wider init than the training default keeps every layer's gradient well above round-off
    let weights = params.weights.map(|name, t| {
        if name.ends_with("gamma") || name.ends_with("beta") || name.ends_with("_b") {
            t.clone()
        } else {
            Tensor::randn(t.shape().to_vec(), &mut rng).expect("valid shape").scale(0.3)
        }
    });
    let clip_shape = vec![cfg.frames, cfg.channels, cfg.height, cfg.width];
    let clips = [
        Tensor::uniform(clip_shape.clone(), 0.0, 1.0, &mut rng)?,
        Tensor::uniform(clip_shape, 0.0, 1.0, &mut rng)?,
    ];
    let tokens = tokenize_batch(&[&clips[0], &clips[1]], &cfg.grid()?)?;
    let [c, h, w] = cfg.output_shape();
    let target = Tensor::uniform(vec![2, c, h, w], 0.0, 1.0, &mut rng)?;
    let op = ModelLoss {
        cfg: cfg.clone(),
        layout: weights.map(|_, t| t.shape().to_vec()),
        running: params.running,
        tokens,
        target,
    };
    let names = weights.entries().into_iter().map(|(n, _)| n).collect();
    let inputs: Vec<Tensor> = weights.values().into_iter().cloned().collect();
    let report = finite_diff_check(&op, &inputs, gc)?;
    let checked: usize = report.per_input.iter().map(|e| e.checked).sum();
    let skipped: usize = report.per_input.iter().map(|e| e.skipped).sum();
    if skipped * 10 > checked + skipped {
        return Err(Error::Numeric(format!(
            "{skipped} of {} coordinates sat on activation kinks; the check is not meaningful",
            checked + skipped
        )));
    }
    Ok((report, names))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_op_matches_training_gradient_shapes() {
        let cfg = ModelConfig::tiny();
        let gc = GradCheckConfig { max_coords: Some(3), skip_nonsmooth: true, tolerance: 1e-3, ..Default::default() };
        let (report, names) = model_gradcheck(&cfg, &gc).unwrap();
        assert_eq!(names.len(), report.per_input.len());
        assert!(report.passed, "{report:?}");
    }
}
