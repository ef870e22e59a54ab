//! Forward passes recorded on a [`Tape`].
//!
//! The tape builders are shared by training (batch statistics in the
//! decoder's batch norms, gradients wanted) and by the pure inference
//! functions at the bottom of this file (running statistics, values only).

use crate::error::{Error, Result};
use crate::model::{tokenize_batch, tubelet_tokenize, MlpActivation, ModelConfig, ModelParams, Weights};
use crate::numerics::ops::{
    AddBroadcast, BatchNorm, Conv2d, Gelu, LayerNorm, MatMul, MultiHeadAttention, PrependRow, Relu, Reshape,
    SelectRow, Sigmoid, Add,
};
use crate::numerics::ops::RunningStats;
use crate::numerics::{Tape, Tensor, Var};

/// Which statistics the decoder's batch norms use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Infer,
}

/// Handles to the intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct Graph {
    pub z0: Var,
    /// `z′_l` after each attention sublayer.
    pub mids: Vec<Var>,
    /// `z_l` after each block.
    pub outs: Vec<Var>,
    /// Clip feature `p`, `B×K`.
    pub feature: Var,
    /// `B×(C·O)×H×W`, values in `[0, 1]`.
    pub prediction: Var,
    /// Input of each decoder batch norm, for running-statistics updates.
    pub bn_inputs: Vec<Var>,
}

/// Records every weight as a tape leaf.
pub fn bind_weights(tape: &mut Tape, weights: &Weights<Tensor>) -> Weights<Var> {
    weights.map(|_, t| tape.leaf(t.clone()))
}

fn ensure_finite(tape: &Tape, v: Var, what: impl FnOnce() -> String) -> Result<()> {
    if tape.value(v).is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite activation in {}", what())))
    }
}

fn dense(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    let y = tape.apply(MatMul, &[x, w])?;
    tape.apply(AddBroadcast, &[y, b])
}

/// `z_0 = [x_cls; tokens·E] + E_pos` for `B×N×D` tokens.
pub fn embed_on_tape(tape: &mut Tape, w: &Weights<Var>, tokens: Var) -> Result<Var> {
    let x = tape.apply(MatMul, &[tokens, w.projection])?;
    let x = tape.apply(PrependRow, &[w.cls, x])?;
    tape.apply(AddBroadcast, &[x, w.positions])
}

/// Pre-norm encoder blocks; returns `(p, mids, outs)`.
pub fn encoder_on_tape(
    tape: &mut Tape,
    w: &Weights<Var>,
    cfg: &ModelConfig,
    z0: Var,
) -> Result<(Var, Vec<Var>, Vec<Var>)> {
    let ln = LayerNorm { eps: cfg.ln_eps };
    let mut z = z0;
    let (mut mids, mut outs) = (Vec::new(), Vec::new());
    for (l, lw) in w.layers.iter().enumerate() {
        let h = tape.apply(ln, &[z, lw.ln1_gamma, lw.ln1_beta])?;
        let a = tape.apply(MultiHeadAttention { heads: cfg.heads }, &[h, lw.wq, lw.wk, lw.wv, lw.wo])?;
        let mid = tape.apply(Add, &[z, a])?;
        let h = tape.apply(ln, &[mid, lw.ln2_gamma, lw.ln2_beta])?;
        let h = dense(tape, h, lw.fc1_w, lw.fc1_b)?;
        let h = match cfg.mlp_activation {
            MlpActivation::Gelu => tape.apply(Gelu, &[h])?,
            MlpActivation::Relu => tape.apply(Relu, &[h])?,
        };
        let h = dense(tape, h, lw.fc2_w, lw.fc2_b)?;
        z = tape.apply(Add, &[mid, h])?;
        ensure_finite(tape, z, || format!("encoder layer {l}"))?;
        mids.push(mid);
        outs.push(z);
    }
    let cls = tape.apply(SelectRow { index: 0 }, &[z])?;
    let p = tape.apply(ln, &[cls, w.final_gamma, w.final_beta])?;
    Ok((p, mids, outs))
}

/// Expands `B×K` features into `B×(C·O)×H×W` frames; returns the output and
/// the input of every batch norm.
pub fn decoder_on_tape(
    tape: &mut Tape,
    w: &Weights<Var>,
    running: &[RunningStats],
    cfg: &ModelConfig,
    p: Var,
    phase: Phase,
) -> Result<(Var, Vec<Var>)> {
    let batch = tape.value(p).outer_len();
    let base = cfg.decoder_base;
    let x = dense(tape, p, w.expand1_w, w.expand1_b)?;
    let x = tape.apply(Relu, &[x])?;
    let x = dense(tape, x, w.expand2_w, w.expand2_b)?;
    let mut x = tape.apply(
        Reshape {
            shape: vec![batch, cfg.decoder_channels[0], base, base],
        },
        &[x],
    )?;
    let mut bn_inputs = Vec::with_capacity(w.stages.len());
    for (i, sw) in w.stages.iter().enumerate() {
        let up = tape.apply(crate::numerics::ops::Upsample2x, &[x])?;
        let conv = tape.apply(Conv2d { stride: 1, padding: 1 }, &[up, sw.kernel])?;
        let bn = BatchNorm {
            eps: cfg.bn_eps,
            fixed: match phase {
                Phase::Train => None,
                Phase::Infer => Some(running[i].clone()),
            },
        };
        let normed = tape.apply(bn, &[conv, sw.bn_gamma, sw.bn_beta])?;
        x = tape.apply(Relu, &[normed])?;
        ensure_finite(tape, x, || format!("decoder stage {i}"))?;
        bn_inputs.push(conv);
    }
    let logits = tape.apply(Conv2d { stride: 1, padding: 0 }, &[x, w.head_w, w.head_b])?;
    Ok((tape.apply(Sigmoid, &[logits])?, bn_inputs))
}

/// Full forward pass over `B×N×D` tokens.
pub fn forward_on_tape(
    tape: &mut Tape,
    w: &Weights<Var>,
    running: &[RunningStats],
    cfg: &ModelConfig,
    tokens: Tensor,
    phase: Phase,
) -> Result<Graph> {
    let tokens = tape.leaf(tokens);
    let z0 = embed_on_tape(tape, w, tokens)?;
    ensure_finite(tape, z0, || "embedding".into())?;
    let (feature, mids, outs) = encoder_on_tape(tape, w, cfg, z0)?;
    let (prediction, bn_inputs) = decoder_on_tape(tape, w, running, cfg, feature, phase)?;
    Ok(Graph {
        z0,
        mids,
        outs,
        feature,
        prediction,
        bn_inputs,
    })
}

/// Intermediate encoder values for a single clip.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderTrace {
    /// `z_0, …, z_L`, each `(N+1)×K`.
    pub z: Vec<Tensor>,
    /// `z′_1, …, z′_L`.
    pub z_mid: Vec<Tensor>,
    /// `[K]`
    pub p: Tensor,
}

fn unbatch(t: &Tensor) -> Result<Tensor> {
    t.clone().reshape(t.shape()[1..].to_vec())
}

/// `z_0` for `N×D` tokens of one clip.
pub fn embed_sequence(tokens: &Tensor, params: &ModelParams) -> Result<Tensor> {
    if tokens.rank() != 2 || tokens.last_dim() != params.weights.projection.shape()[0] {
        return Err(Error::dim("embed_sequence", tokens.shape(), params.weights.projection.shape()));
    }
    let mut tape = Tape::new();
    let w = bind_weights(&mut tape, &params.weights);
    let t = tape.leaf(tokens.clone());
    let z = embed_on_tape(&mut tape, &w, t)?;
    Ok(tape.value(z).clone())
}

/// Runs the encoder on one `(N+1)×K` sequence.
pub fn encoder_forward(z0: &Tensor, params: &ModelParams, cfg: &ModelConfig) -> Result<(Tensor, EncoderTrace)> {
    if z0.rank() != 2 || z0.last_dim() != cfg.embed_dim {
        return Err(Error::Shape(format!("encoder expects (N+1)×{}, got {:?}", cfg.embed_dim, z0.shape())));
    }
    let mut tape = Tape::new();
    let w = bind_weights(&mut tape, &params.weights);
    let z = tape.leaf(z0.clone());
    let (p, mids, outs) = encoder_on_tape(&mut tape, &w, cfg, z)?;
    let p = tape.value(p).clone();
    let mut zs = vec![z0.clone()];
    zs.extend(outs.iter().map(|&v| tape.value(v).clone()));
    Ok((
        p.clone(),
        EncoderTrace {
            z: zs,
            z_mid: mids.iter().map(|&v| tape.value(v).clone()).collect(),
            p,
        },
    ))
}

/// Decodes one `[K]` feature with running batch-norm statistics.
pub fn decoder_forward(p: &Tensor, params: &ModelParams, cfg: &ModelConfig) -> Result<Tensor> {
    if p.len() != cfg.embed_dim {
        return Err(Error::Shape(format!("decoder expects a {}-vector, got {:?}", cfg.embed_dim, p.shape())));
    }
    let mut tape = Tape::new();
    let w = bind_weights(&mut tape, &params.weights);
    let p = tape.leaf(p.clone().reshape(vec![1, cfg.embed_dim])?);
    let (out, _) = decoder_on_tape(&mut tape, &w, &params.running, cfg, p, Phase::Infer)?;
    unbatch(tape.value(out))
}

/// Predictions `B×(C·O)×H×W` and features `B×K` for a batch of `T×C×H×W`
/// clips, using running batch-norm statistics. Each clip's result does not
/// depend on the rest of the batch.
pub fn predict_batch(clips: &[&Tensor], params: &ModelParams, cfg: &ModelConfig) -> Result<(Tensor, Tensor)> {
    let grid = cfg.grid()?;
    let tokens = tokenize_batch(clips, &grid)?;
    let mut tape = Tape::new();
    let w = bind_weights(&mut tape, &params.weights);
    let g = forward_on_tape(&mut tape, &w, &params.running, cfg, tokens, Phase::Infer)?;
    Ok((tape.value(g.prediction).clone(), tape.value(g.feature).clone()))
}

/// `decoder(encoder(embed(tokenize(clip))))` for one clip.
pub fn predict_next_frame(clip: &Tensor, params: &ModelParams, cfg: &ModelConfig) -> Result<Tensor> {
    let grid = cfg.grid()?;
    let tokens = tubelet_tokenize(clip, &grid)?;
    let z0 = embed_sequence(&tokens, params)?;
    let (p, _) = encoder_forward(&z0, params, cfg)?;
    decoder_forward(&p, params, cfg)
}
