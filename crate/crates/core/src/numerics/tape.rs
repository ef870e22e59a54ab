//! Minimal reverse-mode differentiation over [`DifferentiableOp`]s.
//!
//! A [`Tape`] records every value produced during a forward pass together
//! with the op and inputs that produced it. [`Tape::backward`] walks the
//! records in reverse creation order and accumulates vector-Jacobian
//! products, so gradients are available for every recorded value.

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// A differentiable primitive: a forward map and its vector-Jacobian product.
pub trait DifferentiableOp {
    fn name(&self) -> &'static str;

    fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor>;

    /// Returns one cotangent per input, each shaped like that input.
    fn backward(&self, inputs: &[&Tensor], output: &Tensor, cotangent: &Tensor) -> Result<Vec<Tensor>>;
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

struct Node {
    value: Tensor,
    op: Option<Box<dyn DifferentiableOp>>,
    inputs: Vec<usize>,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: None,
            inputs: Vec::new(),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn apply(&mut self, op: impl DifferentiableOp + 'static, inputs: &[Var]) -> Result<Var> {
        let value = {
            let refs: Vec<&Tensor> = inputs.iter().map(|v| &self.nodes[v.0].value).collect();
            op.forward(&refs)?
        };
        self.nodes.push(Node {
            value,
            op: Some(Box::new(op)),
            inputs: inputs.iter().map(|v| v.0).collect(),
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    /// Back-propagates `seed` (the cotangent of `root`) through the tape.
    pub fn backward(&self, root: Var, seed: Tensor) -> Result<Gradients> {
        if seed.shape() != self.nodes[root.0].value.shape() {
            return Err(Error::dim("backward seed", self.nodes[root.0].value.shape(), seed.shape()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; root.0 + 1];
        grads[root.0] = Some(seed);
        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            let Some(op) = &node.op else { continue };
            let Some(cot) = grads[idx].take() else { continue };
            let inputs: Vec<&Tensor> = node.inputs.iter().map(|&i| &self.nodes[i].value).collect();
            let input_grads = op.backward(&inputs, &node.value, &cot)?;
            debug_assert_eq!(input_grads.len(), node.inputs.len(), "{}", op.name());
            for (&i, g) in node.inputs.iter().zip(input_grads) {
                match &mut grads[i] {
                    Some(acc) => acc.add_assign(&g)?,
                    slot @ None => *slot = Some(g),
                }
            }
        }
        Ok(Gradients { grads })
    }
}

/// Cotangents produced by [`Tape::backward`]; populated for leaves.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Gradient of `var`, or zeros shaped like `like` when `var` did not
    /// influence the root.
    pub fn get_or_zeros(&self, var: Var, like: &Tensor) -> Tensor {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::from_parts(like.shape().to_vec(), vec![0.0; like.len()]))
    }
}
