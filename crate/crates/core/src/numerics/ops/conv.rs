use crate::error::{Error, Result};
use crate::numerics::tape::DifferentiableOp;
use crate::numerics::Tensor;

/// `(batch, channels, height, width)` of a `B×C×H×W` or `C×H×W` tensor.
fn image_layout(x: &Tensor, op: &str) -> Result<(usize, usize, usize, usize)> {
    match *x.shape() {
        [b, c, h, w] => Ok((b, c, h, w)),
        [c, h, w] => Ok((1, c, h, w)),
        _ => Err(Error::Shape(format!("{op} expects C×H×W or B×C×H×W, got {:?}", x.shape()))),
    }
}

fn with_spatial(x: &Tensor, c: usize, h: usize, w: usize) -> Vec<usize> {
    let mut shape = x.shape().to_vec();
    let r = shape.len();
    shape[r - 3] = c;
    shape[r - 2] = h;
    shape[r - 1] = w;
    shape
}

/// Output-index range `[lo, hi)` whose input index `o*stride + k - pad`
/// falls inside `[0, extent)`.
fn valid_range(out: usize, extent: usize, k: usize, stride: usize, pad: usize) -> (usize, usize) {
    let mut lo = 0;
    while lo < out && (lo * stride + k) < pad {
        lo += 1;
    }
    let mut hi = out;
    while hi > lo && ((hi - 1) * stride + k) >= pad + extent {
        hi -= 1;
    }
    (lo, hi)
}

/// 2-D cross-correlation over `(x, kernels[, bias])` with
/// `kernels: C_out×C_in×kh×kw` and symmetric zero padding.
#[derive(Debug, Clone, Copy)]
pub struct Conv2d {
    pub stride: usize,
    pub padding: usize,
}

struct ConvGeom {
    b: usize,
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
}

impl Conv2d {
    fn geometry(&self, inputs: &[&Tensor]) -> Result<ConvGeom> {
        let (x, kern) = (inputs[0], inputs[1]);
        let (b, cin, h, w) = image_layout(x, "conv2d")?;
        let [cout, kcin, kh, kw] = *kern.shape() else {
            return Err(Error::Shape(format!("conv2d kernels must be 4-D, got {:?}", kern.shape())));
        };
        if kcin != cin {
            return Err(Error::dim("conv2d", x.shape(), kern.shape()));
        }
        if let Some(bias) = inputs.get(2) {
            if bias.shape() != [cout] {
                return Err(Error::dim("conv2d bias", kern.shape(), bias.shape()));
            }
        }
        if self.stride == 0 {
            return Err(Error::Config("conv2d stride must be positive".into()));
        }
        let (ph, pw) = (h + 2 * self.padding, w + 2 * self.padding);
        if kh > ph || kw > pw {
            return Err(Error::Shape(format!(
                "kernel {kh}×{kw} larger than padded input {ph}×{pw}"
            )));
        }
        if (ph - kh) % self.stride != 0 || (pw - kw) % self.stride != 0 {
            return Err(Error::Shape(format!(
                "non-integral conv2d output: padded {ph}×{pw}, kernel {kh}×{kw}, stride {}",
                self.stride
            )));
        }
        Ok(ConvGeom {
            b,
            cin,
            h,
            w,
            cout,
            kh,
            kw,
            oh: (ph - kh) / self.stride + 1,
            ow: (pw - kw) / self.stride + 1,
        })
    }

    /// Visits every (input row, output row, kernel value) triple that
    /// contributes, passing the matching contiguous column ranges.
    #[allow(clippy::too_many_arguments)]
    fn for_each_tap(
        &self,
        g: &ConvGeom,
        mut f: impl FnMut(usize, usize, usize, usize, usize, usize, usize, usize, usize),
    ) {
        let (s, p) = (self.stride, self.padding);
        for bi in 0..g.b {
            for co in 0..g.cout {
                for ci in 0..g.cin {
                    for ky in 0..g.kh {
                        let (oy_lo, oy_hi) = valid_range(g.oh, g.h, ky, s, p);
                        for kx in 0..g.kw {
                            let (ox_lo, ox_hi) = valid_range(g.ow, g.w, kx, s, p);
                            if ox_lo >= ox_hi {
                                continue;
                            }
                            for oy in oy_lo..oy_hi {
                                let iy = oy * s + ky - p;
                                f(bi, co, ci, ky, kx, oy, iy, ox_lo, ox_hi);
                            }
                        }
                    }
                }
            }
        }
    }
}

impl DifferentiableOp for Conv2d {
    fn name(&self) -> &'static str {
        "conv2d"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor> {
        let g = self.geometry(inputs)?;
        let (xd, kd) = (inputs[0].data(), inputs[1].data());
        let (s, p) = (self.stride, self.padding);
        let mut out = vec![0.0; g.b * g.cout * g.oh * g.ow];
        if let Some(bias) = inputs.get(2) {
            for (i, plane) in out.chunks_exact_mut(g.oh * g.ow).enumerate() {
                plane.fill(bias.data()[i % g.cout]);
            }
        }
        self.for_each_tap(&g, |bi, co, ci, ky, kx, oy, iy, lo, hi| {
            let wv = kd[((co * g.cin + ci) * g.kh + ky) * g.kw + kx];
            if wv == 0.0 {
                return;
            }
            let in_row = &xd[((bi * g.cin + ci) * g.h + iy) * g.w..][..g.w];
            let out_row = &mut out[((bi * g.cout + co) * g.oh + oy) * g.ow..][..g.ow];
            if s == 1 {
                let ix0 = lo + kx - p;
                for (o, x) in out_row[lo..hi].iter_mut().zip(&in_row[ix0..ix0 + (hi - lo)]) {
                    *o += wv * x;
                }
            } else {
                for ox in lo..hi {
                    out_row[ox] += wv * in_row[ox * s + kx - p];
                }
            }
        });
        Ok(Tensor::from_parts(with_spatial(inputs[0], g.cout, g.oh, g.ow), out))
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Result<Vec<Tensor>> {
        let g = self.geometry(inputs)?;
        let (xd, kd, gd) = (inputs[0].data(), inputs[1].data(), grad.data());
        let (s, p) = (self.stride, self.padding);
        let mut dx = vec![0.0; xd.len()];
        let mut dk = vec![0.0; kd.len()];
        self.for_each_tap(&g, |bi, co, ci, ky, kx, oy, iy, lo, hi| {
            let widx = ((co * g.cin + ci) * g.kh + ky) * g.kw + kx;
            let wv = kd[widx];
            let in_off = ((bi * g.cin + ci) * g.h + iy) * g.w;
            let g_row = &gd[((bi * g.cout + co) * g.oh + oy) * g.ow..][..g.ow];
            let mut acc = 0.0;
            if s == 1 {
                let ix0 = lo + kx - p;
                let n = hi - lo;
                for ((d, x), gv) in dx[in_off + ix0..in_off + ix0 + n]
                    .iter_mut()
                    .zip(&xd[in_off + ix0..in_off + ix0 + n])
                    .zip(&g_row[lo..hi])
                {
                    *d += wv * gv;
                    acc += gv * x;
                }
            } else {
                for (ox, &gv) in (lo..hi).zip(&g_row[lo..hi]) {
                    let ix = in_off + ox * s + kx - p;
                    dx[ix] += wv * gv;
                    acc += gv * xd[ix];
                }
            }
            dk[widx] += acc;
        });
        let mut grads = vec![
            Tensor::from_parts(inputs[0].shape().to_vec(), dx),
            Tensor::from_parts(inputs[1].shape().to_vec(), dk),
        ];
        if inputs.len() > 2 {
            let mut db = vec![0.0; g.cout];
            for (i, plane) in gd.chunks_exact(g.oh * g.ow).enumerate() {
                db[i % g.cout] += plane.iter().sum::<f64>();
            }
            grads.push(Tensor::from_parts(vec![g.cout], db));
        }
        Ok(grads)
    }
}

pub fn conv2d(x: &Tensor, kernels: &Tensor, stride: usize, padding: usize) -> Result<Tensor> {
    Conv2d { stride, padding }.forward(&[x, kernels])
}

/// Nearest-neighbour 2× spatial upsampling.
#[derive(Debug, Clone, Copy, Default)]
pub struct Upsample2x;

impl DifferentiableOp for Upsample2x {
    fn name(&self) -> &'static str {
        "upsample_nn_2x"
    }

    fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor> {
        let x = inputs[0];
        let (b, c, h, w) = image_layout(x, "upsample_nn_2x")?;
        let (oh, ow) = (2 * h, 2 * w);
        let mut out = vec![0.0; b * c * oh * ow];
        for (src, dst) in x.data().chunks_exact(h * w).zip(out.chunks_exact_mut(oh * ow)) {
            for y in 0..oh {
                let s_row = &src[(y / 2) * w..(y / 2 + 1) * w];
                for (xo, d) in dst[y * ow..(y + 1) * ow].iter_mut().enumerate() {
                    *d = s_row[xo / 2];
                }
            }
        }
        Ok(Tensor::from_parts(with_spatial(x, c, oh, ow), out))
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, g: &Tensor) -> Result<Vec<Tensor>> {
        let x = inputs[0];
        let (_, _, h, w) = image_layout(x, "upsample_nn_2x")?;
        let (oh, ow) = (2 * h, 2 * w);
        let mut dx = vec![0.0; x.len()];
        for (src, dst) in g.data().chunks_exact(oh * ow).zip(dx.chunks_exact_mut(h * w)) {
            for y in 0..oh {
                for xo in 0..ow {
                    dst[(y / 2) * w + xo / 2] += src[y * ow + xo];
                }
            }
        }
        Ok(vec![Tensor::from_parts(x.shape().to_vec(), dx)])
    }
}

pub fn upsample_nn_2x(x: &Tensor) -> Result<Tensor> {
    Upsample2x.forward(&[x])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_kernel() {
        let x = Tensor::new(vec![1, 2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let k = Tensor::ones(vec![1, 1, 1, 1]).unwrap();
        assert_eq!(conv2d(&x, &k, 1, 0).unwrap(), x);
    }

    #[test]
    fn box_sum_of_ones() {
        let x = Tensor::ones(vec![1, 5, 5]).unwrap();
        let k = Tensor::ones(vec![1, 1, 3, 3]).unwrap();
        let y = conv2d(&x, &k, 1, 0).unwrap();
        assert_eq!(y, Tensor::full(vec![1, 3, 3], 9.0).unwrap());
    }

    #[test]
    fn zero_kernel_gives_zero() {
        let x = Tensor::ones(vec![2, 4, 4]).unwrap();
        let k = Tensor::zeros(vec![3, 2, 3, 3]).unwrap();
        assert_eq!(conv2d(&x, &k, 1, 1).unwrap(), Tensor::zeros(vec![3, 4, 4]).unwrap());
    }

    #[test]
    fn padding_and_stride_extents() {
        let x = Tensor::ones(vec![1, 8, 8]).unwrap();
        let k = Tensor::ones(vec![1, 1, 3, 3]).unwrap();
        assert_eq!(conv2d(&x, &k, 1, 1).unwrap().shape(), &[1, 8, 8]);
        // (8 + 2 - 3) / 2 is not integral
        assert!(matches!(conv2d(&x, &k, 2, 1), Err(Error::Shape(_))));
        let x = Tensor::ones(vec![1, 7, 7]).unwrap();
        let y = conv2d(&x, &k, 2, 1).unwrap();
        assert_eq!(y.shape(), &[1, 4, 4]);
        // corner sees a 2×2 window of ones
        assert_eq!(y.get(&[0, 0, 0]), Some(4.0));
        assert_eq!(y.get(&[0, 1, 1]), Some(9.0));
    }

    #[test]
    fn upsample_examples() {
        let x = Tensor::full(vec![1, 1, 1], 5.0).unwrap();
        assert_eq!(upsample_nn_2x(&x).unwrap(), Tensor::full(vec![1, 2, 2], 5.0).unwrap());
        let x = Tensor::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = upsample_nn_2x(&x).unwrap();
        #[rustfmt::skip]
        let expect = [
            1.0, 1.0, 2.0, 2.0,
            1.0, 1.0, 2.0, 2.0,
            3.0, 3.0, 4.0, 4.0,
            3.0, 3.0, 4.0, 4.0,
        ];
        assert_eq!(y.data(), &expect);
    }

    #[test]
    fn upsample_quadruples_sum() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let x = Tensor::randn(vec![3, 5, 7], &mut rng).unwrap();
        let y = upsample_nn_2x(&x).unwrap();
        assert!((y.sum() - 4.0 * x.sum()).abs() < 1e-10);
    }
}
