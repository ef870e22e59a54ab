use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::tape::DifferentiableOp;
use crate::numerics::Tensor;

/// Normalizes every last-axis slice to zero mean and unit population
/// variance, then applies `gamma ⊙ x̂ + beta`.
#[derive(Debug, Clone, Copy)]
pub struct LayerNorm {
    pub eps: f64,
}

impl LayerNorm {
    fn check(&self, x: &Tensor, gamma: &Tensor, beta: &Tensor) -> Result<usize> {
        let d = x.last_dim();
        if gamma.shape() != [d] {
            return Err(Error::dim("layer_norm", x.shape(), gamma.shape()));
        }
        if beta.shape() != [d] {
            return Err(Error::dim("layer_norm", x.shape(), beta.shape()));
        }
        if self.eps.is_nan() || self.eps < 0.0 {
            return Err(Error::Config(format!("layer_norm eps must be non-negative, got {}", self.eps)));
        }
        Ok(d)
    }
}

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

impl DifferentiableOp for LayerNorm {
    fn name(&self) -> &'static str {
        "layer_norm"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor> {
        let (x, gamma, beta) = (inputs[0], inputs[1], inputs[2]);
        let d = self.check(x, gamma, beta)?;
        let mut out = vec![0.0; x.len()];
        for (row, dst) in x.data().chunks_exact(d).zip(out.chunks_exact_mut(d)) {
            let (mean, var) = moments(row);
            let inv = 1.0 / (var + self.eps).sqrt();
            for (((o, &xi), &g), &b) in dst.iter_mut().zip(row).zip(gamma.data()).zip(beta.data()) {
                *o = if inv.is_finite() { g * (xi - mean) * inv + b } else { b };
            }
        }
        Ok(Tensor::from_parts(x.shape().to_vec(), out))
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, g: &Tensor) -> Result<Vec<Tensor>> {
        let (x, gamma) = (inputs[0], inputs[1]);
        let d = x.last_dim();
        let mut dx = vec![0.0; x.len()];
        let mut dgamma = vec![0.0; d];
        let mut dbeta = vec![0.0; d];
        let mut xhat = vec![0.0; d];
        let mut dxhat = vec![0.0; d];
        for ((row, grow), dst) in x
            .data()
            .chunks_exact(d)
            .zip(g.data().chunks_exact(d))
            .zip(dx.chunks_exact_mut(d))
        {
            let (mean, var) = moments(row);
            let inv = 1.0 / (var + self.eps).sqrt();
            for i in 0..d {
                xhat[i] = (row[i] - mean) * inv;
                dxhat[i] = grow[i] * gamma.data()[i];
                dgamma[i] += grow[i] * xhat[i];
                dbeta[i] += grow[i];
            }
            let m1 = dxhat.iter().sum::<f64>() / d as f64;
            let m2 = dxhat.iter().zip(&xhat).map(|(a, b)| a * b).sum::<f64>() / d as f64;
            for i in 0..d {
                dst[i] = inv * (dxhat[i] - m1 - xhat[i] * m2);
            }
        }
        Ok(vec![
            Tensor::from_parts(x.shape().to_vec(), dx),
            Tensor::from_parts(vec![d], dgamma),
            Tensor::from_parts(vec![d], dbeta),
        ])
    }
}

pub fn layer_norm(x: &Tensor, gamma: &Tensor, beta: &Tensor, eps: f64) -> Result<Tensor> {
    LayerNorm { eps }.forward(&[x, gamma, beta])
}

/// Per-channel running mean and population variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    pub fn new(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
        }
    }

    /// `running ← (1 − momentum)·running + momentum·batch`.
    pub fn update(&mut self, batch: &RunningStats, momentum: f64) {
        for (r, b) in self.mean.iter_mut().zip(&batch.mean) {
            *r = (1.0 - momentum) * *r + momentum * b;
        }
        for (r, b) in self.var.iter_mut().zip(&batch.var) {
            *r = (1.0 - momentum) * *r + momentum * b;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    Train,
    Infer,
}

/// `(batch, channels, per-channel plane)` view of a `B×C×H×W` or `C×H×W` tensor.
fn bn_layout(x: &Tensor) -> Result<(usize, usize, usize)> {
    match *x.shape() {
        [b, c, h, w] => Ok((b, c, h * w)),
        [c, h, w] => Ok((1, c, h * w)),
        _ => Err(Error::Shape(format!("batch_norm expects B×C×H×W, got {:?}", x.shape()))),
    }
}

/// Population mean and variance per channel over batch and spatial axes.
pub fn channel_moments(x: &Tensor) -> Result<RunningStats> {
    let (b, c, plane) = bn_layout(x)?;
    let mut stats = RunningStats::new(c);
    let n = (b * plane) as f64;
    let d = x.data();
    for ch in 0..c {
        let mut sum = 0.0;
        for bi in 0..b {
            let off = (bi * c + ch) * plane;
            sum += d[off..off + plane].iter().sum::<f64>();
        }
        let mean = sum / n;
        let mut sq = 0.0;
        for bi in 0..b {
            let off = (bi * c + ch) * plane;
            sq += d[off..off + plane].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        }
        stats.mean[ch] = mean;
        stats.var[ch] = sq / n;
    }
    Ok(stats)
}

/// Batch normalization as a differentiable op over `(x, gamma, beta)`.
///
/// With `fixed: None` the batch statistics are used (training); with
/// `Some(stats)` the supplied running statistics are used (inference).
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub eps: f64,
    pub fixed: Option<RunningStats>,
}

impl BatchNorm {
    fn stats(&self, x: &Tensor) -> Result<RunningStats> {
        match &self.fixed {
            Some(s) => Ok(s.clone()),
            None => {
                let (b, _, plane) = bn_layout(x)?;
                if b * plane < 2 {
                    return Err(Error::DegenerateBatch(format!(
                        "train-mode batch_norm needs at least 2 values per channel, input {:?}",
                        x.shape()
                    )));
                }
                channel_moments(x)
            }
        }
    }
}

impl DifferentiableOp for BatchNorm {
    fn name(&self) -> &'static str {
        match self.fixed {
            None => "batch_norm_train",
            Some(_) => "batch_norm_infer",
        }
    }

    fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor> {
        let (x, gamma, beta) = (inputs[0], inputs[1], inputs[2]);
        let (b, c, plane) = bn_layout(x)?;
        if gamma.shape() != [c] || beta.shape() != [c] {
            return Err(Error::dim("batch_norm", x.shape(), gamma.shape()));
        }
        let stats = self.stats(x)?;
        if stats.mean.len() != c {
            return Err(Error::Shape(format!("running stats for {} channels, input has {c}", stats.mean.len())));
        }
        let mut out = x.data().to_vec();
        for ch in 0..c {
            let inv = 1.0 / (stats.var[ch] + self.eps).sqrt();
            let (g, bt, m) = (gamma.data()[ch], beta.data()[ch], stats.mean[ch]);
            for bi in 0..b {
                let off = (bi * c + ch) * plane;
                for v in &mut out[off..off + plane] {
                    *v = if inv.is_finite() { g * (*v - m) * inv + bt } else { bt };
                }
            }
        }
        Ok(Tensor::from_parts(x.shape().to_vec(), out))
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, g: &Tensor) -> Result<Vec<Tensor>> {
        let (x, gamma) = (inputs[0], inputs[1]);
        let (b, c, plane) = bn_layout(x)?;
        let stats = self.stats(x)?;
        let n = (b * plane) as f64;
        let (xd, gd) = (x.data(), g.data());
        let mut dx = vec![0.0; x.len()];
        let mut dgamma = vec![0.0; c];
        let mut dbeta = vec![0.0; c];
        for ch in 0..c {
            let inv = 1.0 / (stats.var[ch] + self.eps).sqrt();
            let (gm, m) = (gamma.data()[ch], stats.mean[ch]);
            let (mut sg, mut sgx) = (0.0, 0.0);
            for bi in 0..b {
                let off = (bi * c + ch) * plane;
                for i in off..off + plane {
                    let xhat = (xd[i] - m) * inv;
                    sg += gd[i];
                    sgx += gd[i] * xhat;
                }
            }
            dgamma[ch] = sgx;
            dbeta[ch] = sg;
            for bi in 0..b {
                let off = (bi * c + ch) * plane;
                for i in off..off + plane {
                    dx[i] = match self.fixed {
                        Some(_) => gm * inv * gd[i],
                        None => {
                            let xhat = (xd[i] - m) * inv;
                            gm * inv * (gd[i] - sg / n - xhat * sgx / n)
                        }
                    };
                }
            }
        }
        Ok(vec![
            Tensor::from_parts(x.shape().to_vec(), dx),
            Tensor::from_parts(vec![c], dgamma),
            Tensor::from_parts(vec![c], dbeta),
        ])
    }
}

/// Batch normalization with running-statistics bookkeeping.
///
/// In [`BnMode::Train`] the batch moments normalize the input and are
/// folded into `running` with the given momentum; in [`BnMode::Infer`]
/// `running` is used as-is.
pub fn batch_norm(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    running: &mut RunningStats,
    mode: BnMode,
    eps: f64,
    momentum: f64,
) -> Result<Tensor> {
    match mode {
        BnMode::Train => {
            let op = BatchNorm { eps, fixed: None };
            let out = op.forward(&[x, gamma, beta])?;
            running.update(&channel_moments(x)?, momentum);
            Ok(out)
        }
        BnMode::Infer => BatchNorm {
            eps,
            fixed: Some(running.clone()),
        }
        .forward(&[x, gamma, beta]),
    }
}
