use crate::error::{Error, Result};
use crate::numerics::tape::DifferentiableOp;
use crate::numerics::Tensor;

#[derive(Debug, Clone)]
pub struct Reshape {
    pub shape: Vec<usize>,
}

impl DifferentiableOp for Reshape {
    fn name(&self) -> &'static str {
        "reshape"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor> {
        inputs[0].clone().reshape(self.shape.clone())
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, g: &Tensor) -> Result<Vec<Tensor>> {
        Ok(vec![g.clone().reshape(inputs[0].shape().to_vec())?])
    }
}

/// Prepends one shared row to every sequence: `([K] or [1,K], [..., N, K]) → [..., N+1, K]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PrependRow;

impl DifferentiableOp for PrependRow {
    fn name(&self) -> &'static str {
        "prepend_row"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor> {
        let (row, x) = (inputs[0], inputs[1]);
        if x.rank() < 2 || row.len() != x.last_dim() {
            return Err(Error::dim("prepend_row", row.shape(), x.shape()));
        }
        let k = x.last_dim();
        let n = x.shape()[x.rank() - 2];
        let seqs = x.len() / (n * k);
        let mut out = Vec::with_capacity(seqs * (n + 1) * k);
        for seq in x.data().chunks_exact(n * k) {
            out.extend_from_slice(row.data());
            out.extend_from_slice(seq);
        }
        let mut shape = x.shape().to_vec();
        let r = shape.len();
        shape[r - 2] = n + 1;
        Ok(Tensor::from_parts(shape, out))
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, g: &Tensor) -> Result<Vec<Tensor>> {
        let (row, x) = (inputs[0], inputs[1]);
        let k = x.last_dim();
        let n = x.shape()[x.rank() - 2];
        let mut drow = vec![0.0; k];
        let mut dx = Vec::with_capacity(x.len());
        for seq in g.data().chunks_exact((n + 1) * k) {
            for (d, v) in drow.iter_mut().zip(&seq[..k]) {
                *d += v;
            }
            dx.extend_from_slice(&seq[k..]);
        }
        Ok(vec![
            Tensor::from_parts(row.shape().to_vec(), drow),
            Tensor::from_parts(x.shape().to_vec(), dx),
        ])
    }
}

/// Picks row `index` of every sequence: `[..., S, K] → [..., K]`.
#[derive(Debug, Clone, Copy)]
pub struct SelectRow {
    pub index: usize,
}

impl DifferentiableOp for SelectRow {
    fn name(&self) -> &'static str {
        "select_row"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor> {
        let x = inputs[0];
        if x.rank() < 2 {
            return Err(Error::Shape(format!("select_row expects [..., S, K], got {:?}", x.shape())));
        }
        let k = x.last_dim();
        let s = x.shape()[x.rank() - 2];
        if self.index >= s {
            return Err(Error::Shape(format!("row {} out of range for {s} rows", self.index)));
        }
        let out: Vec<f64> = x
            .data()
            .chunks_exact(s * k)
            .flat_map(|seq| seq[self.index * k..(self.index + 1) * k].iter().copied())
            .collect();
        let mut shape = x.shape()[..x.rank() - 2].to_vec();
        shape.push(k);
        Ok(Tensor::from_parts(shape, out))
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, g: &Tensor) -> Result<Vec<Tensor>> {
        let x = inputs[0];
        let k = x.last_dim();
        let s = x.shape()[x.rank() - 2];
        let mut dx = vec![0.0; x.len()];
        for (seq, gk) in dx.chunks_exact_mut(s * k).zip(g.data().chunks_exact(k)) {
            seq[self.index * k..(self.index + 1) * k].copy_from_slice(gk);
        }
        Ok(vec![Tensor::from_parts(x.shape().to_vec(), dx)])
    }
}

/// Mean over all elements of `(pred − target)²`, as a `[1]` tensor.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanSquaredError;

impl DifferentiableOp for MeanSquaredError {
    fn name(&self) -> &'static str {
        "mse_loss"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor> {
        let (p, t) = (inputs[0], inputs[1]);
        if p.shape() != t.shape() {
            return Err(Error::dim("mse_loss", p.shape(), t.shape()));
        }
        let sum: f64 = p.data().iter().zip(t.data()).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(Tensor::scalar(sum / p.len() as f64))
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, g: &Tensor) -> Result<Vec<Tensor>> {
        let (p, t) = (inputs[0], inputs[1]);
        let s = 2.0 * g.data()[0] / p.len() as f64;
        let dp = p.zip_map(t, |a, b| s * (a - b))?;
        let dt = dp.scale(-1.0);
        Ok(vec![dp, dt])
    }
}
