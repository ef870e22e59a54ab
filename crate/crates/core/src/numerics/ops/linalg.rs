use crate::error::{Error, Result};
use crate::numerics::tape::DifferentiableOp;
use crate::numerics::Tensor;

/// `c += a · b` with `a: m×k`, `b: k×n`, all row-major.
pub(crate) fn gemm(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let c_row = &mut c[i * n..(i + 1) * n];
        for (r, &a_ir) in a[i * k..(i + 1) * k].iter().enumerate() {
            if a_ir == 0.0 {
                continue;
            }
            let b_row = &b[r * n..(r + 1) * n];
            for (cj, &bj) in c_row.iter_mut().zip(b_row) {
                *cj += a_ir * bj;
            }
        }
    }
}

/// `c += aᵀ · b` with `a: m×k`, `b: m×n`, result `k×n`.
pub(crate) fn gemm_tn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let b_row = &b[i * n..(i + 1) * n];
        for (p, &a_ip) in a[i * k..(i + 1) * k].iter().enumerate() {
            if a_ip == 0.0 {
                continue;
            }
            let c_row = &mut c[p * n..(p + 1) * n];
            for (cj, &bj) in c_row.iter_mut().zip(b_row) {
                *cj += a_ip * bj;
            }
        }
    }
}

/// `c += a · bᵀ` with `a: m×n`, `b: k×n`, result `m×k`.
pub(crate) fn gemm_nt(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let a_row = &a[i * n..(i + 1) * n];
        for j in 0..k {
            let b_row = &b[j * n..(j + 1) * n];
            let mut acc = 0.0;
            for (x, y) in a_row.iter().zip(b_row) {
                acc += x * y;
            }
            c[i * k + j] += acc;
        }
    }
}

/// Matrix product. The left operand may carry leading batch axes, which
/// are flattened into rows: `[..., k] × [k, n] → [..., n]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MatMul;

impl DifferentiableOp for MatMul {
    fn name(&self) -> &'static str {
        "matmul"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor> {
        let (a, b) = (inputs[0], inputs[1]);
        if b.rank() != 2 || a.last_dim() != b.shape()[0] {
            return Err(Error::dim("matmul", a.shape(), b.shape()));
        }
        let (m, k, n) = (a.outer_len(), b.shape()[0], b.shape()[1]);
        let mut out = vec![0.0; m * n];
        gemm(a.data(), b.data(), &mut out, m, k, n);
        let mut shape = a.shape().to_vec();
        *shape.last_mut().unwrap() = n;
        Ok(Tensor::from_parts(shape, out))
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, g: &Tensor) -> Result<Vec<Tensor>> {
        let (a, b) = (inputs[0], inputs[1]);
        let (m, k, n) = (a.outer_len(), b.shape()[0], b.shape()[1]);
        let mut da = vec![0.0; m * k];
        gemm_nt(g.data(), b.data(), &mut da, m, k, n);
        let mut db = vec![0.0; k * n];
        gemm_tn(a.data(), g.data(), &mut db, m, k, n);
        Ok(vec![
            Tensor::from_parts(a.shape().to_vec(), da),
            Tensor::from_parts(b.shape().to_vec(), db),
        ])
    }
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rank() != 2 {
        return Err(Error::Shape(format!("matmul expects a matrix, got shape {:?}", a.shape())));
    }
    MatMul.forward(&[a, b])
}

/// Elementwise sum of two equally shaped tensors.
#[derive(Debug, Clone, Copy, Default)]
pub struct Add;

impl DifferentiableOp for Add {
    fn name(&self) -> &'static str {
        "add"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor> {
        inputs[0].zip_map(inputs[1], |a, b| a + b)
    }

    fn backward(&self, _inputs: &[&Tensor], _output: &Tensor, g: &Tensor) -> Result<Vec<Tensor>> {
        Ok(vec![g.clone(), g.clone()])
    }
}

/// `x + y` where `y`'s shape is a trailing suffix of `x`'s shape; `y` is
/// repeated over the leading axes (bias and position-table addition).
#[derive(Debug, Clone, Copy, Default)]
pub struct AddBroadcast;

impl DifferentiableOp for AddBroadcast {
    fn name(&self) -> &'static str {
        "add_broadcast"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor> {
        let (x, y) = (inputs[0], inputs[1]);
        let (xs, ys) = (x.shape(), y.shape());
        if ys.len() > xs.len() || xs[xs.len() - ys.len()..] != *ys {
            return Err(Error::dim("add_broadcast", xs, ys));
        }
        let block = y.len();
        let mut out = x.data().to_vec();
        for chunk in out.chunks_exact_mut(block) {
            for (o, b) in chunk.iter_mut().zip(y.data()) {
                *o += b;
            }
        }
        Ok(Tensor::from_parts(xs.to_vec(), out))
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, g: &Tensor) -> Result<Vec<Tensor>> {
        let y = inputs[1];
        let mut dy = vec![0.0; y.len()];
        for chunk in g.data().chunks_exact(y.len()) {
            for (d, v) in dy.iter_mut().zip(chunk) {
                *d += v;
            }
        }
        Ok(vec![g.clone(), Tensor::from_parts(y.shape().to_vec(), dy)])
    }
}
