//! Central finite-difference verification of [`DifferentiableOp`] backward rules.
//!
//! The op output is reduced to a scalar with a random projection `r`, so a
//! single backward call with cotangent `r` yields the full gradient of
//! `⟨r, op(x)⟩`. Each checked coordinate is compared with
//! `(f(x + h eᵢ) − f(x − h eᵢ)) / 2h`.
//!
//! Errors are normwise per input: `max |analytic − numeric|` divided by the
//! larger of the two gradients' max-norms (floored at `1e-6`).

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::tape::DifferentiableOp;
use crate::numerics::Tensor;

const SCALE_FLOOR: f64 = 1e-6;
/// Relative disagreement between the `h` and `h/2` estimates that marks a
/// kink; smooth coordinates disagree by `O(h²)`.
const KINK_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub tolerance: f64,
    pub step: f64,
    pub seed: u64,
    /// Check at most this many coordinates per input, sampled with `seed`.
    pub max_coords: Option<usize>,
    /// Skip coordinates where estimates at `h` and `h/2` disagree, which
    /// only happens when the probe straddles a kink (e.g. ReLU at 0).
    pub skip_nonsmooth: bool,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            step: 1e-5,
            seed: 0,
            max_coords: None,
            skip_nonsmooth: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InputError {
    pub input: usize,
    pub max_abs_error: f64,
    pub relative_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub op: String,
    pub max_relative_error: f64,
    pub per_input: Vec<InputError>,
    pub tolerance: f64,
    pub passed: bool,
}

fn projected(op: &dyn DifferentiableOp, inputs: &[Tensor], r: &Tensor) -> Result<f64> {
    let refs: Vec<&Tensor> = inputs.iter().collect();
    let out = op.forward(&refs)?;
    if !out.is_finite() {
        return Err(Error::Numeric(format!("{}: non-finite output during finite differences", op.name())));
    }
    r.dot(&out)
}

pub fn finite_diff_check(
    op: &dyn DifferentiableOp,
    inputs: &[Tensor],
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    if inputs.iter().any(|t| !t.is_finite()) {
        return Err(Error::Numeric(format!("{}: non-finite input", op.name())));
    }
    let refs: Vec<&Tensor> = inputs.iter().collect();
    let out = op.forward(&refs)?;
    if !out.is_finite() {
        return Err(Error::Numeric(format!("{}: non-finite forward output", op.name())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let r = Tensor::randn(out.shape().to_vec(), &mut rng)?;
    let analytic = op.backward(&refs, &out, &r)?;
    if analytic.len() != inputs.len() {
        return Err(Error::Shape(format!(
            "{}: backward returned {} cotangents for {} inputs",
            op.name(),
            analytic.len(),
            inputs.len()
        )));
    }

    let h = cfg.step;
    let mut work = inputs.to_vec();
    let mut per_input = Vec::with_capacity(inputs.len());
    for (i, a) in analytic.iter().enumerate() {
        if a.shape() != inputs[i].shape() || !a.is_finite() {
            return Err(Error::Numeric(format!(
                "{}: cotangent {i} has shape {:?} (input {:?}) or non-finite entries",
                op.name(),
                a.shape(),
                inputs[i].shape()
            )));
        }
        let n = a.len();
        let coords: Vec<usize> = match cfg.max_coords {
            Some(m) if m < n => {
                let mut c = sample(&mut rng, n, m).into_vec();
                c.sort_unstable();
                c
            }
            _ => (0..n).collect(),
        };
        let a_scale = a.max_abs();
        let mut numeric = Vec::with_capacity(coords.len());
        let mut skipped = 0;
        for &j in &coords {
            let x0 = work[i].data()[j];
            let mut central = |step: f64| -> Result<f64> {
                work[i].data_mut()[j] = x0 + step;
                let fp = projected(op, &work, &r)?;
                work[i].data_mut()[j] = x0 - step;
                let fm = projected(op, &work, &r)?;
                work[i].data_mut()[j] = x0;
                Ok((fp - fm) / (2.0 * step))
            };
            let est = central(h)?;
            if cfg.skip_nonsmooth {
                let half = central(h / 2.0)?;
                if (est - half).abs() > KINK_THRESHOLD * a_scale.max(SCALE_FLOOR) {
                    skipped += 1;
                    continue;
                }
            }
            numeric.push((j, est));
        }
        let n_scale = numeric.iter().fold(0.0_f64, |m, &(_, v)| m.max(v.abs()));
        let max_abs_error = numeric
            .iter()
            .fold(0.0_f64, |m, &(j, v)| m.max((a.data()[j] - v).abs()));
        let denom = a_scale.max(n_scale).max(SCALE_FLOOR);
        per_input.push(InputError {
            input: i,
            max_abs_error,
            relative_error: max_abs_error / denom,
            checked: numeric.len(),
            skipped,
        });
    }

    let max_relative_error = per_input.iter().fold(0.0_f64, |m, e| m.max(e.relative_error));
    Ok(GradCheckReport {
        op: op.name().to_string(),
        max_relative_error,
        per_input,
        tolerance: cfg.tolerance,
        passed: max_relative_error <= cfg.tolerance,
    })
}
