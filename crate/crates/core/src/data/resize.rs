use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Source coordinate and blend weight for one output index, half-pixel
/// centers (align-corners = false), clamped at the borders.
fn taps(out_len: usize, in_len: usize) -> Vec<(usize, usize, f64)> {
    let scale = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (in_len - 1) as f64);
            let lo = src.floor() as usize;
            let hi = (lo + 1).min(in_len - 1);
            (lo, hi, src - lo as f64)
        })
        .collect()
}

/// Bilinear resize of a `C×H×W` frame.
///
/// Output pixel `o` samples source coordinate `(o + 0.5)·in/out − 0.5`,
/// clamped to the valid range.
pub fn resize_bilinear(frame: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let [c, h, w] = *frame.shape() else {
        return Err(Error::Shape(format!("resize expects C×H×W, got {:?}", frame.shape())));
    };
    if out_h == 0 || out_w == 0 {
        return Err(Error::Shape(format!("resize target {out_h}×{out_w} must be positive")));
    }
    if (out_h, out_w) == (h, w) {
        return Ok(frame.clone());
    }
    let (ty, tx) = (taps(out_h, h), taps(out_w, w));
    let src = frame.data();
    let mut out = Vec::with_capacity(c * out_h * out_w);
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        for &(y0, y1, fy) in &ty {
            for &(x0, x1, fx) in &tx {
                let top = plane[y0 * w + x0] * (1.0 - fx) + plane[y0 * w + x1] * fx;
                let bottom = plane[y1 * w + x0] * (1.0 - fx) + plane[y1 * w + x1] * fx;
                out.push(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    Tensor::new(vec![c, out_h, out_w], out)
}
