use crate::error::{Error, Result};
use crate::numerics::ops::activation::softmax_slice;
use crate::numerics::ops::linalg::{gemm, gemm_nt, gemm_tn};
use crate::numerics::tape::DifferentiableOp;
use crate::numerics::Tensor;

/// Multi-head self-attention over `(z, Wq, Wk, Wv, Wo)`.
///
/// `z` is `[..., S, K]`; leading axes are independent sequences. Each head
/// attends over a `K / heads` column slice with scaled dot-product
/// attention, and the concatenated head outputs are projected by `Wo`.
#[derive(Debug, Clone, Copy)]
pub struct MultiHeadAttention {
    pub heads: usize,
}

struct Projections {
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// attention weights, `[seq][head][S][S]`
    attn: Vec<f64>,
    /// concatenated head outputs, same layout as `q`
    heads_out: Vec<f64>,
}

impl MultiHeadAttention {
    fn dims(&self, inputs: &[&Tensor]) -> Result<(usize, usize, usize)> {
        let z = inputs[0];
        if z.rank() < 2 {
            return Err(Error::Shape(format!("attention expects [..., S, K], got {:?}", z.shape())));
        }
        let k = z.last_dim();
        let s = z.shape()[z.rank() - 2];
        for w in &inputs[1..5] {
            if w.shape() != [k, k] {
                return Err(Error::dim("multi_head_attention", z.shape(), w.shape()));
            }
        }
        if self.heads == 0 || !k.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "embedding width {k} is not divisible by {} heads",
                self.heads
            )));
        }
        Ok((z.len() / (s * k), s, k))
    }

    fn project(&self, inputs: &[&Tensor], seqs: usize, s: usize, k: usize) -> Projections {
        let z = inputs[0].data();
        let rows = seqs * s;
        let mut q = vec![0.0; rows * k];
        let mut kk = vec![0.0; rows * k];
        let mut v = vec![0.0; rows * k];
        gemm(z, inputs[1].data(), &mut q, rows, k, k);
        gemm(z, inputs[2].data(), &mut kk, rows, k, k);
        gemm(z, inputs[3].data(), &mut v, rows, k, k);

        let hd = k / self.heads;
        let scale = 1.0 / (hd as f64).sqrt();
        let mut attn = vec![0.0; seqs * self.heads * s * s];
        let mut heads_out = vec![0.0; rows * k];
        for b in 0..seqs {
            for h in 0..self.heads {
                let a = &mut attn[(b * self.heads + h) * s * s..(b * self.heads + h + 1) * s * s];
                for i in 0..s {
                    let qi = &q[(b * s + i) * k + h * hd..(b * s + i) * k + (h + 1) * hd];
                    let row = &mut a[i * s..(i + 1) * s];
                    for (j, r) in row.iter_mut().enumerate() {
                        let kj = &kk[(b * s + j) * k + h * hd..(b * s + j) * k + (h + 1) * hd];
                        *r = qi.iter().zip(kj).map(|(x, y)| x * y).sum::<f64>() * scale;
                    }
                    softmax_slice(row);
                    let out = &mut heads_out[(b * s + i) * k + h * hd..(b * s + i) * k + (h + 1) * hd];
                    for (j, &w) in row.iter().enumerate() {
                        let vj = &v[(b * s + j) * k + h * hd..(b * s + j) * k + (h + 1) * hd];
                        for (o, x) in out.iter_mut().zip(vj) {
                            *o += w * x;
                        }
                    }
                }
            }
        }
        Projections {
            q,
            k: kk,
            v,
            attn,
            heads_out,
        }
    }

    /// Attention weights `[seqs, heads, S, S]` for inspection and tests.
    pub fn weights(&self, inputs: &[&Tensor]) -> Result<Tensor> {
        let (seqs, s, k) = self.dims(inputs)?;
        let p = self.project(inputs, seqs, s, k);
        Ok(Tensor::from_parts(vec![seqs, self.heads, s, s], p.attn))
    }
}

impl DifferentiableOp for MultiHeadAttention {
    fn name(&self) -> &'static str {
        "multi_head_attention"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor> {
        let (seqs, s, k) = self.dims(inputs)?;
        let p = self.project(inputs, seqs, s, k);
        let mut out = vec![0.0; seqs * s * k];
        gemm(&p.heads_out, inputs[4].data(), &mut out, seqs * s, k, k);
        Ok(Tensor::from_parts(inputs[0].shape().to_vec(), out))
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, g: &Tensor) -> Result<Vec<Tensor>> {
        let (seqs, s, k) = self.dims(inputs)?;
        let rows = seqs * s;
        let p = self.project(inputs, seqs, s, k);
        let (z, wq, wk, wv, wo) = (inputs[0], inputs[1], inputs[2], inputs[3], inputs[4]);

        let mut dwo = vec![0.0; k * k];
        gemm_tn(&p.heads_out, g.data(), &mut dwo, rows, k, k);
        let mut dho = vec![0.0; rows * k];
        gemm_nt(g.data(), wo.data(), &mut dho, rows, k, k);

        let hd = k / self.heads;
        let scale = 1.0 / (hd as f64).sqrt();
        let mut dq = vec![0.0; rows * k];
        let mut dk = vec![0.0; rows * k];
        let mut dv = vec![0.0; rows * k];
        let mut da = vec![0.0; s];
        for b in 0..seqs {
            for h in 0..self.heads {
                let a = &p.attn[(b * self.heads + h) * s * s..(b * self.heads + h + 1) * s * s];
                let at = |t: usize| (b * s + t) * k + h * hd;
                for i in 0..s {
                    let go = &dho[at(i)..at(i) + hd];
                    let arow = &a[i * s..(i + 1) * s];
                    // dA_ij = dO_i · V_j ; dV_j += A_ij dO_i
                    for j in 0..s {
                        let vj = &p.v[at(j)..at(j) + hd];
                        da[j] = go.iter().zip(vj).map(|(x, y)| x * y).sum();
                        let dvj = &mut dv[at(j)..at(j) + hd];
                        for (d, x) in dvj.iter_mut().zip(go) {
                            *d += arow[j] * x;
                        }
                    }
                    let dot: f64 = arow.iter().zip(&da).map(|(x, y)| x * y).sum();
                    for j in 0..s {
                        let ds = arow[j] * (da[j] - dot) * scale;
                        if ds == 0.0 {
                            continue;
                        }
                        let (qi, kj) = (at(i), at(j));
                        for t in 0..hd {
                            dq[qi + t] += ds * p.k[kj + t];
                            dk[kj + t] += ds * p.q[qi + t];
                        }
                    }
                }
            }
        }

        let mut dz = vec![0.0; rows * k];
        gemm_nt(&dq, wq.data(), &mut dz, rows, k, k);
        gemm_nt(&dk, wk.data(), &mut dz, rows, k, k);
        gemm_nt(&dv, wv.data(), &mut dz, rows, k, k);
        let mut dwq = vec![0.0; k * k];
        let mut dwk = vec![0.0; k * k];
        let mut dwv = vec![0.0; k * k];
        gemm_tn(z.data(), &dq, &mut dwq, rows, k, k);
        gemm_tn(z.data(), &dk, &mut dwk, rows, k, k);
        gemm_tn(z.data(), &dv, &mut dwv, rows, k, k);

        let kk = vec![k, k];
        Ok(vec![
            Tensor::from_parts(z.shape().to_vec(), dz),
            Tensor::from_parts(kk.clone(), dwq),
            Tensor::from_parts(kk.clone(), dwk),
            Tensor::from_parts(kk.clone(), dwv),
            Tensor::from_parts(kk, dwo),
        ])
    }
}

pub fn multi_head_attention(
    z: &Tensor,
    wq: &Tensor,
    wk: &Tensor,
    wv: &Tensor,
    wo: &Tensor,
    heads: usize,
) -> Result<Tensor> {
    MultiHeadAttention { heads }.forward(&[z, wq, wk, wv, wo])
}
