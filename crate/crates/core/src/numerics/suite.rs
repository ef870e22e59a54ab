//! Randomized finite-difference suites for every registered operator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::numerics::gradcheck::{finite_diff_check, GradCheckConfig, GradCheckReport};
use crate::numerics::ops::*;
use crate::numerics::tape::DifferentiableOp;
use crate::numerics::Tensor;

/// Names of every operator covered by [`check_operator`], in report order.
pub const OPERATORS: &[&str] = &[
    "matmul",
    "add",
    "add_broadcast",
    "layer_norm",
    "softmax",
    "multi_head_attention",
    "conv2d",
    "upsample_nn_2x",
    "batch_norm_train",
    "batch_norm_infer",
    "gelu",
    "relu",
    "sigmoid",
    "reshape",
    "prepend_row",
    "select_row",
    "mse_loss",
];

/// Number of random shapes/seeds each operator is checked on.
pub const TRIALS: u64 = 10;

type Case = (Box<dyn DifferentiableOp>, Vec<Tensor>);

fn randn(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::randn(shape, rng).expect("positive extents")
}

fn pick(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> usize {
    rng.random_range(lo..=hi)
}

fn make_case(name: &str, rng: &mut ChaCha8Rng) -> Case {
    match name {
        "matmul" => {
            let (m, k, n) = (pick(rng, 1, 4), pick(rng, 1, 5), pick(rng, 1, 4));
            let batched = pick(rng, 0, 1) == 1;
            let a_shape = if batched { vec![2, m, k] } else { vec![m, k] };
            (Box::new(MatMul), vec![randn(a_shape, rng), randn(vec![k, n], rng)])
        }
        "add" => {
            let s = vec![pick(rng, 1, 3), pick(rng, 1, 4)];
            (Box::new(Add), vec![randn(s.clone(), rng), randn(s, rng)])
        }
        "add_broadcast" => {
            let (b, n, k) = (pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 4));
            (Box::new(AddBroadcast), vec![randn(vec![b, n, k], rng), randn(vec![n, k], rng)])
        }
        "layer_norm" => {
            let (r, w) = (pick(rng, 1, 3), pick(rng, 2, 8));
            (
                Box::new(LayerNorm { eps: 1e-5 }),
                vec![randn(vec![r, w], rng), randn(vec![w], rng), randn(vec![w], rng)],
            )
        }
        "softmax" => {
            let shape = vec![pick(rng, 1, 3), pick(rng, 2, 5), pick(rng, 1, 3)];
            let axis = pick(rng, 0, 2);
            (Box::new(Softmax { axis }), vec![randn(shape, rng)])
        }
        "multi_head_attention" => {
            let heads = pick(rng, 1, 3);
            let k = heads * pick(rng, 1, 3);
            let s = pick(rng, 1, 5);
            let z = randn(vec![pick(rng, 1, 2), s, k], rng);
            let mut ws: Vec<Tensor> = (0..4).map(|_| randn(vec![k, k], rng).scale(0.7)).collect();
            let mut inputs = vec![z];
            inputs.append(&mut ws);
            (Box::new(MultiHeadAttention { heads }), inputs)
        }
        "conv2d" => {
            let (stride, padding) = (pick(rng, 1, 2), pick(rng, 0, 1));
            let (kh, kw) = (pick(rng, 1, 3), pick(rng, 1, 3));
            let (oh, ow) = (pick(rng, 1, 4), pick(rng, 1, 4));
            // smallest input extent with an integral output, widened to the drawn output size
            let fit = |k: usize, o: usize| {
                let mut e = 1;
                while e + 2 * padding < k || !(e + 2 * padding - k).is_multiple_of(stride) {
                    e += 1;
                }
                e + (o - 1) * stride
            };
            let (h, w) = (fit(kh, oh), fit(kw, ow));
            let (cin, cout) = (pick(rng, 1, 3), pick(rng, 1, 3));
            let x = randn(vec![pick(rng, 1, 2), cin, h, w], rng);
            let k = randn(vec![cout, cin, kh, kw], rng);
            let b = randn(vec![cout], rng);
            (Box::new(Conv2d { stride, padding }), vec![x, k, b])
        }
        "upsample_nn_2x" => {
            let shape = vec![pick(rng, 1, 2), pick(rng, 1, 3), pick(rng, 1, 4), pick(rng, 1, 4)];
            (Box::new(Upsample2x), vec![randn(shape, rng)])
        }
        "batch_norm_train" | "batch_norm_infer" => {
            let c = pick(rng, 1, 3);
            let x = randn(vec![pick(rng, 1, 3), c, pick(rng, 2, 3), pick(rng, 1, 3)], rng);
            let g = randn(vec![c], rng);
            let b = randn(vec![c], rng);
            let fixed = (name == "batch_norm_infer").then(|| RunningStats {
                mean: (0..c).map(|_| rng.random_range(-1.0..1.0)).collect(),
                var: (0..c).map(|_| rng.random_range(0.2..2.0)).collect(),
            });
            (Box::new(BatchNorm { eps: 1e-5, fixed }), vec![x, g, b])
        }
        "gelu" => (Box::new(Gelu), vec![randn(vec![pick(rng, 1, 4), pick(rng, 1, 4)], rng).scale(2.0)]),
        "relu" => {
            // keep probes away from the kink at zero
            let x = randn(vec![pick(rng, 1, 4), pick(rng, 1, 4)], rng).map(|v| if v >= 0.0 { v + 0.1 } else { v - 0.1 });
            (Box::new(Relu), vec![x])
        }
        "sigmoid" => (Box::new(Sigmoid), vec![randn(vec![pick(rng, 1, 4), pick(rng, 1, 4)], rng).scale(2.0)]),
        "reshape" => {
            let (a, b) = (pick(rng, 1, 4), pick(rng, 1, 4));
            (Box::new(Reshape { shape: vec![b, a] }), vec![randn(vec![a, b], rng)])
        }
        "prepend_row" => {
            let k = pick(rng, 1, 4);
            let x = randn(vec![pick(rng, 1, 3), pick(rng, 1, 3), k], rng);
            (Box::new(PrependRow), vec![randn(vec![k], rng), x])
        }
        "select_row" => {
            let s = pick(rng, 1, 4);
            let index = pick(rng, 0, s - 1);
            (Box::new(SelectRow { index }), vec![randn(vec![pick(rng, 1, 3), s, pick(rng, 1, 4)], rng)])
        }
        "mse_loss" => {
            let s = vec![pick(rng, 1, 3), pick(rng, 1, 4)];
            (Box::new(MeanSquaredError), vec![randn(s.clone(), rng), randn(s, rng)])
        }
        other => panic!("unregistered operator {other}"),
    }
}

/// Checks one operator over [`TRIALS`] random shapes and seeds and returns
/// the worst report.
pub fn check_operator(name: &str, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut worst: Option<GradCheckReport> = None;
    for trial in 0..TRIALS {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(1_000_003).wrapping_add(trial));
        let (op, inputs) = make_case(name, &mut rng);
        let trial_cfg = GradCheckConfig {
            seed: cfg.seed.wrapping_add(trial),
            ..cfg.clone()
        };
        let mut report = finite_diff_check(op.as_ref(), &inputs, &trial_cfg)?;
        report.op = name.to_string();
        if worst
            .as_ref()
            .is_none_or(|w| report.max_relative_error > w.max_relative_error)
        {
            worst = Some(report);
        }
    }
    Ok(worst.expect("TRIALS > 0"))
}

pub fn operator_suite(cfg: &GradCheckConfig) -> Result<Vec<GradCheckReport>> {
    OPERATORS.iter().map(|name| check_operator(name, cfg)).collect()
}
