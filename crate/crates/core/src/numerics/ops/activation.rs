use crate::error::{Error, Result};
use crate::numerics::tape::DifferentiableOp;
use crate::numerics::Tensor;

/// Splits a shape around `axis` into (outer, len, inner) strides.
fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

pub(crate) fn softmax_slice(row: &mut [f64]) {
    let max = row.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let mut total = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in row.iter_mut() {
        *x /= total;
    }
}

/// Exp-normalization along one axis with max subtraction.
#[derive(Debug, Clone, Copy)]
pub struct Softmax {
    pub axis: usize,
}

impl DifferentiableOp for Softmax {
    fn name(&self) -> &'static str {
        "softmax"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor> {
        let x = inputs[0];
        if self.axis >= x.rank() {
            return Err(Error::Shape(format!("softmax axis {} out of range for {:?}", self.axis, x.shape())));
        }
        let (outer, len, inner) = axis_split(x.shape(), self.axis);
        let mut out = x.data().to_vec();
        let mut buf = vec![0.0; len];
        for o in 0..outer {
            for j in 0..inner {
                let base = o * len * inner + j;
                for i in 0..len {
                    buf[i] = out[base + i * inner];
                }
                softmax_slice(&mut buf);
                for i in 0..len {
                    out[base + i * inner] = buf[i];
                }
            }
        }
        Ok(Tensor::from_parts(x.shape().to_vec(), out))
    }

    fn backward(&self, _inputs: &[&Tensor], y: &Tensor, g: &Tensor) -> Result<Vec<Tensor>> {
        let (outer, len, inner) = axis_split(y.shape(), self.axis);
        let (yd, gd) = (y.data(), g.data());
        let mut dx = vec![0.0; y.len()];
        for o in 0..outer {
            for j in 0..inner {
                let base = o * len * inner + j;
                let dot: f64 = (0..len).map(|i| yd[base + i * inner] * gd[base + i * inner]).sum();
                for i in 0..len {
                    let at = base + i * inner;
                    dx[at] = yd[at] * (gd[at] - dot);
                }
            }
        }
        Ok(vec![Tensor::from_parts(y.shape().to_vec(), dx)])
    }
}

pub fn softmax(x: &Tensor, axis: usize) -> Result<Tensor> {
    Softmax { axis }.forward(&[x])
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// GELU, tanh approximation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Gelu;

impl DifferentiableOp for Gelu {
    fn name(&self) -> &'static str {
        "gelu"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor> {
        Ok(inputs[0].map(|x| 0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())))
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, g: &Tensor) -> Result<Vec<Tensor>> {
        let dx = inputs[0].zip_map(g, |x, g| {
            let u = GELU_C * (x + GELU_A * x * x * x);
            let t = u.tanh();
            let du = GELU_C * (1.0 + 3.0 * GELU_A * x * x);
            g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)
        })?;
        Ok(vec![dx])
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Relu;

impl DifferentiableOp for Relu {
    fn name(&self) -> &'static str {
        "relu"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor> {
        Ok(inputs[0].map(|x| x.max(0.0)))
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, g: &Tensor) -> Result<Vec<Tensor>> {
        Ok(vec![inputs[0].zip_map(g, |x, g| if x > 0.0 { g } else { 0.0 })?])
    }
}

fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sigmoid;

impl DifferentiableOp for Sigmoid {
    fn name(&self) -> &'static str {
        "sigmoid"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor> {
        Ok(inputs[0].map(sigmoid_scalar))
    }

    fn backward(&self, _inputs: &[&Tensor], y: &Tensor, g: &Tensor) -> Result<Vec<Tensor>> {
        Ok(vec![y.zip_map(g, |y, g| g * y * (1.0 - y))?])
    }
}
