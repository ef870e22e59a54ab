use std::convert::Infallible;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::numerics::ops::RunningStats;
use crate::numerics::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights<T> {
    pub ln1_gamma: T,
    pub ln1_beta: T,
    pub wq: T,
    pub wk: T,
    pub wv: T,
    pub wo: T,
    pub ln2_gamma: T,
    pub ln2_beta: T,
    pub fc1_w: T,
    pub fc1_b: T,
    pub fc2_w: T,
    pub fc2_b: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageWeights<T> {
    /// `C_out×C_in×3×3`
    pub kernel: T,
    pub bn_gamma: T,
    pub bn_beta: T,
}

/// Every trainable tensor of the network, generic over the slot type so the
/// same layout carries shapes, values, tape handles and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights<T> {
    /// `E`: `token_dim×K`
    pub projection: T,
    /// `x_cls`: `1×K`
    pub cls: T,
    /// `E_pos`: `(N+1)×K`
    pub positions: T,
    pub layers: Vec<LayerWeights<T>>,
    pub final_gamma: T,
    pub final_beta: T,
    pub expand1_w: T,
    pub expand1_b: T,
    pub expand2_w: T,
    pub expand2_b: T,
    pub stages: Vec<StageWeights<T>>,
    /// `C_out×C_S×1×1`
    pub head_w: T,
    pub head_b: T,
}

impl<T> Weights<T> {
    /// Maps every slot in a fixed order, passing its dotted name.
    pub fn try_map<U, E>(&self, mut f: impl FnMut(&str, &T) -> Result<U, E>) -> Result<Weights<U>, E> {
        let projection = f("projection", &self.projection)?;
        let cls = f("cls", &self.cls)?;
        let positions = f("positions", &self.positions)?;
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            let mut g = |n: &str, v: &T| f(&format!("layers.{i}.{n}"), v);
            layers.push(LayerWeights {
                ln1_gamma: g("ln1_gamma", &l.ln1_gamma)?,
                ln1_beta: g("ln1_beta", &l.ln1_beta)?,
                wq: g("wq", &l.wq)?,
                wk: g("wk", &l.wk)?,
                wv: g("wv", &l.wv)?,
                wo: g("wo", &l.wo)?,
                ln2_gamma: g("ln2_gamma", &l.ln2_gamma)?,
                ln2_beta: g("ln2_beta", &l.ln2_beta)?,
                fc1_w: g("fc1_w", &l.fc1_w)?,
                fc1_b: g("fc1_b", &l.fc1_b)?,
                fc2_w: g("fc2_w", &l.fc2_w)?,
                fc2_b: g("fc2_b", &l.fc2_b)?,
            });
        }
        let final_gamma = f("final_gamma", &self.final_gamma)?;
        let final_beta = f("final_beta", &self.final_beta)?;
        let expand1_w = f("expand1_w", &self.expand1_w)?;
        let expand1_b = f("expand1_b", &self.expand1_b)?;
        let expand2_w = f("expand2_w", &self.expand2_w)?;
        let expand2_b = f("expand2_b", &self.expand2_b)?;
        let mut stages = Vec::with_capacity(self.stages.len());
        for (i, s) in self.stages.iter().enumerate() {
            stages.push(StageWeights {
                kernel: f(&format!("stages.{i}.kernel"), &s.kernel)?,
                bn_gamma: f(&format!("stages.{i}.bn_gamma"), &s.bn_gamma)?,
                bn_beta: f(&format!("stages.{i}.bn_beta"), &s.bn_beta)?,
            });
        }
        Ok(Weights {
            projection,
            cls,
            positions,
            layers,
            final_gamma,
            final_beta,
            expand1_w,
            expand1_b,
            expand2_w,
            expand2_b,
            stages,
            head_w: f("head_w", &self.head_w)?,
            head_b: f("head_b", &self.head_b)?,
        })
    }

    pub fn map<U>(&self, mut f: impl FnMut(&str, &T) -> U) -> Weights<U> {
        match self.try_map::<U, Infallible>(|n, v| Ok(f(n, v))) {
            Ok(w) => w,
            Err(never) => match never {},
        }
    }

    /// Slots in the same order as [`Weights::try_map`].
    pub fn entries(&self) -> Vec<(String, &T)> {
        let mut names = Vec::new();
        self.map(|n, _| names.push(n.to_string()));
        names.into_iter().zip(self.values()).collect()
    }

    pub fn values(&self) -> Vec<&T> {
        let mut v: Vec<&T> = vec![&self.projection, &self.cls, &self.positions];
        for l in &self.layers {
            v.extend([
                &l.ln1_gamma, &l.ln1_beta, &l.wq, &l.wk, &l.wv, &l.wo, &l.ln2_gamma, &l.ln2_beta, &l.fc1_w,
                &l.fc1_b, &l.fc2_w, &l.fc2_b,
            ]);
        }
        v.extend([
            &self.final_gamma,
            &self.final_beta,
            &self.expand1_w,
            &self.expand1_b,
            &self.expand2_w,
            &self.expand2_b,
        ]);
        for s in &self.stages {
            v.extend([&s.kernel, &s.bn_gamma, &s.bn_beta]);
        }
        v.extend([&self.head_w, &self.head_b]);
        v
    }

    pub fn values_mut(&mut self) -> Vec<&mut T> {
        let mut v: Vec<&mut T> = vec![&mut self.projection, &mut self.cls, &mut self.positions];
        for l in &mut self.layers {
            v.extend([
                &mut l.ln1_gamma,
                &mut l.ln1_beta,
                &mut l.wq,
                &mut l.wk,
                &mut l.wv,
                &mut l.wo,
                &mut l.ln2_gamma,
                &mut l.ln2_beta,
                &mut l.fc1_w,
                &mut l.fc1_b,
                &mut l.fc2_w,
                &mut l.fc2_b,
            ]);
        }
        v.extend([
            &mut self.final_gamma,
            &mut self.final_beta,
            &mut self.expand1_w,
            &mut self.expand1_b,
            &mut self.expand2_w,
            &mut self.expand2_b,
        ]);
        for s in &mut self.stages {
            v.extend([&mut s.kernel, &mut s.bn_gamma, &mut s.bn_beta]);
        }
        v.extend([&mut self.head_w, &mut self.head_b]);
        v
    }

    /// Rebuilds a layout from `values` in [`Weights::values`] order.
    pub fn from_values<U>(template: &Weights<U>, values: Vec<T>) -> Result<Self> {
        let expected = template.values().len();
        if values.len() != expected {
            return Err(Error::Shape(format!("{} tensors for a layout of {expected}", values.len())));
        }
        let mut it = values.into_iter();
        Ok(template.map(|_, _| it.next().expect("length checked")))
    }
}

/// Parameter shapes implied by a configuration.
pub fn param_shapes(cfg: &ModelConfig) -> Result<Weights<Vec<usize>>> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let k = cfg.embed_dim;
    let c0 = cfg.decoder_channels[0];
    let b = cfg.decoder_base;
    let layer = LayerWeights {
        ln1_gamma: vec![k],
        ln1_beta: vec![k],
        wq: vec![k, k],
        wk: vec![k, k],
        wv: vec![k, k],
        wo: vec![k, k],
        ln2_gamma: vec![k],
        ln2_beta: vec![k],
        fc1_w: vec![k, cfg.mlp_size],
        fc1_b: vec![cfg.mlp_size],
        fc2_w: vec![cfg.mlp_size, k],
        fc2_b: vec![k],
    };
    let stages = cfg
        .decoder_channels
        .windows(2)
        .map(|w| StageWeights {
            kernel: vec![w[1], w[0], 3, 3],
            bn_gamma: vec![w[1]],
            bn_beta: vec![w[1]],
        })
        .collect();
    let last = *cfg.decoder_channels.last().expect("validated");
    Ok(Weights {
        projection: vec![grid.token_dim(), k],
        cls: vec![1, k],
        positions: vec![grid.tokens() + 1, k],
        layers: vec![layer; cfg.layers],
        final_gamma: vec![k],
        final_beta: vec![k],
        expand1_w: vec![k, cfg.fc_hidden],
        expand1_b: vec![cfg.fc_hidden],
        expand2_w: vec![cfg.fc_hidden, b * b * c0],
        expand2_b: vec![b * b * c0],
        stages,
        head_w: vec![cfg.output_channels(), last, 1, 1],
        head_b: vec![cfg.output_channels()],
    })
}

pub fn param_count(cfg: &ModelConfig) -> Result<usize> {
    Ok(param_shapes(cfg)?.values().iter().map(|s| s.iter().product::<usize>()).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum InitKind {
    Ones,
    Zeros,
    /// Truncated normal with `init_std`.
    Normal,
    /// Truncated normal with std `sqrt(gain / fan_in)`.
    FanIn(f64),
}

/// Transformer weights use a fixed small std. Decoder weights are scaled by
/// fan-in so the expansion and conv stack start with unit-order activations.
fn init_kind(name: &str) -> InitKind {
    let leaf = name.rsplit('.').next().unwrap_or(name);
    if leaf.ends_with("gamma") {
        InitKind::Ones
    } else if leaf.ends_with("beta") || leaf.ends_with("_b") {
        InitKind::Zeros
    } else if leaf == "head_w" {
        InitKind::FanIn(1.0)
    } else if leaf.starts_with("expand") || leaf == "kernel" {
        InitKind::FanIn(2.0)
    } else {
        InitKind::Normal
    }
}

/// Linear weights are `[in, out]`, conv kernels `[out, in, kh, kw]`.
fn fan_in(shape: &[usize]) -> usize {
    match shape {
        [fan, _] => *fan,
        [_, rest @ ..] => rest.iter().product(),
        [] => 1,
    }
}

fn truncated_normal(rng: &mut ChaCha8Rng, std: f64, n: usize) -> Result<Vec<f64>> {
    let normal = Normal::new(0.0, std).map_err(|e| Error::Config(e.to_string()))?;
    Ok((0..n)
        .map(|_| loop {
            let v: f64 = normal.sample(rng);
            if v.abs() <= 2.0 * std {
                break v;
            }
        })
        .collect())
}

/// Trainable weights plus the batch-norm running statistics of each stage.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub weights: Weights<Tensor>,
    pub running: Vec<RunningStats>,
}

impl ModelParams {
    /// Checks shapes against `cfg` and that every value is finite.
    pub fn validate(&self, cfg: &ModelConfig) -> Result<()> {
        let shapes = param_shapes(cfg)?;
        for ((name, t), s) in self.weights.entries().into_iter().zip(shapes.values()) {
            if t.shape() != s.as_slice() {
                return Err(Error::Shape(format!("parameter {name} is {:?}, config needs {s:?}", t.shape())));
            }
            if !t.is_finite() {
                return Err(Error::Numeric(format!("parameter {name} is not finite")));
            }
        }
        if self.weights.layers.len() != cfg.layers || self.weights.stages.len() != cfg.decoder_stages() {
            return Err(Error::Shape("parameter layout does not match config depth".into()));
        }
        for (i, (r, s)) in self.running.iter().zip(&shapes.stages).enumerate() {
            if r.mean.len() != s.bn_gamma[0] || r.var.len() != s.bn_gamma[0] {
                return Err(Error::Shape(format!("running stats of stage {i} have the wrong width")));
            }
        }
        if self.running.len() != cfg.decoder_stages() {
            return Err(Error::Shape("one running-stats entry per decoder stage expected".into()));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.weights.values().iter().map(|t| t.len()).sum()
    }
}

/// Weights from a normal distribution truncated at two standard deviations;
/// biases and norm shifts zero, norm scales one, running stats (0, 1).
pub fn init_params(cfg: &ModelConfig, seed: u64) -> Result<ModelParams> {
    let shapes = param_shapes(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = shapes.try_map(|name, shape| {
        let n: usize = shape.iter().product();
        let data = match init_kind(name) {
            InitKind::Ones => vec![1.0; n],
            InitKind::Zeros => vec![0.0; n],
            InitKind::Normal => truncated_normal(&mut rng, cfg.init_std, n)?,
            InitKind::FanIn(gain) => truncated_normal(&mut rng, (gain / fan_in(shape) as f64).sqrt(), n)?,
        };
        Tensor::new(shape.clone(), data)
    })?;
    let running = cfg.decoder_channels[1..].iter().map(|&c| RunningStats::new(c)).collect();
    Ok(ModelParams { weights, running })
}
