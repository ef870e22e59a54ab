use crate::error::{Error, Result};
use crate::model::Weights;
use crate::numerics::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moments, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub m: Weights<Tensor>,
    pub v: Weights<Tensor>,
    pub step: u64,
}

impl OptimizerState {
    pub fn zeros_like(params: &Weights<Tensor>) -> Self {
        let zeros = params.map(|_, t| Tensor::zeros(t.shape().to_vec()).expect("shape already valid"));
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

/// One bias-corrected Adam step, in place.
pub fn adam_update(
    params: &mut Weights<Tensor>,
    grads: &Weights<Tensor>,
    state: &mut OptimizerState,
    cfg: &AdamConfig,
) -> Result<()> {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let g = grads.values();
    let (m, v) = (state.m.values_mut(), state.v.values_mut());
    for (((p, g), m), v) in params.values_mut().into_iter().zip(g).zip(m).zip(v) {
        if p.shape() != g.shape() || p.shape() != m.shape() || p.shape() != v.shape() {
            return Err(Error::dim("adam_update", p.shape(), g.shape()));
        }
        let (pd, md, vd) = (p.data_mut(), m.data_mut(), v.data_mut());
        for (i, &gi) in g.data().iter().enumerate() {
            md[i] = cfg.beta1 * md[i] + (1.0 - cfg.beta1) * gi;
            vd[i] = cfg.beta2 * vd[i] + (1.0 - cfg.beta2) * gi * gi;
            let mhat = md[i] / c1;
            let vhat = vd[i] / c2;
            pd[i] -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

/// Euclidean norm over every gradient tensor.
pub fn global_norm(grads: &Weights<Tensor>) -> f64 {
    grads
        .values()
        .iter()
        .flat_map(|t| t.data().iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt()
}

/// Rescales `grads` so their global norm is at most `max_norm`; returns the norm before clipping.
pub fn clip_global_norm(grads: &mut Weights<Tensor>, max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm {
        let s = max_norm / norm;
        for t in grads.values_mut() {
            *t = t.scale(s);
        }
    }
    norm
}
