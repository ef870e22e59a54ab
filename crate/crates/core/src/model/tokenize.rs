//! Tubelet tokenization.
//!
//! Tokens are ordered temporal-major, then row-major over the spatial grid.
//! Within a token the values are laid out time, then row, then column, then
//! channel (channel varies fastest).

use crate::error::{Error, Result};
use crate::model::TubeletGrid;
use crate::numerics::Tensor;

/// Calls `f(token_offset, clip_offset)` for every value, in token order.
fn for_each_pair(grid: &TubeletGrid, mut f: impl FnMut(usize, usize)) {
    let [_, c, hh, ww] = grid.clip_shape();
    let mut k = 0;
    for it in 0..grid.n_t {
        for ih in 0..grid.n_h {
            for iw in 0..grid.n_w {
                for dt in 0..grid.t {
                    let frame = it * grid.t + dt;
                    for dy in 0..grid.h {
                        let y = ih * grid.h + dy;
                        for dx in 0..grid.w {
                            let x = iw * grid.w + dx;
                            for ch in 0..c {
                                f(k, ((frame * c + ch) * hh + y) * ww + x);
                                k += 1;
                            }
                        }
                    }
                }
            }
        }
    }
}

pub fn tubelet_tokenize(clip: &Tensor, grid: &TubeletGrid) -> Result<Tensor> {
    if clip.shape() != grid.clip_shape() {
        return Err(Error::Shape(format!(
            "clip {:?} does not match tubelet grid over {:?}",
            clip.shape(),
            grid.clip_shape()
        )));
    }
    let src = clip.data();
    let mut out = vec![0.0; src.len()];
    for_each_pair(grid, |k, i| out[k] = src[i]);
    Tensor::new(vec![grid.tokens(), grid.token_dim()], out)
}

pub fn tubelet_untokenize(tokens: &Tensor, grid: &TubeletGrid) -> Result<Tensor> {
    if tokens.shape() != [grid.tokens(), grid.token_dim()] {
        return Err(Error::Shape(format!(
            "tokens {:?} do not match grid ({} × {})",
            tokens.shape(),
            grid.tokens(),
            grid.token_dim()
        )));
    }
    let src = tokens.data();
    let mut out = vec![0.0; src.len()];
    for_each_pair(grid, |k, i| out[i] = src[k]);
    Tensor::new(grid.clip_shape().to_vec(), out)
}

/// Tokenizes each clip and stacks the results into `B×N×D`.
pub fn tokenize_batch(clips: &[&Tensor], grid: &TubeletGrid) -> Result<Tensor> {
    if clips.is_empty() {
        return Err(Error::Shape("empty batch".into()));
    }
    let tokens = clips
        .iter()
        .map(|c| tubelet_tokenize(c, grid))
        .collect::<Result<Vec<_>>>()?;
    Tensor::stack(&tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_token_grid_reshapes() {
        let grid = TubeletGrid::new([2, 1, 2, 2], [2, 2, 2]).unwrap();
        let clip = Tensor::new(vec![2, 1, 2, 2], (0..8).map(f64::from).collect()).unwrap();
        let tok = tubelet_tokenize(&clip, &grid).unwrap();
        assert_eq!(tok.shape(), &[1, 8]);
        assert_eq!(tok.data(), clip.data());
    }

    #[test]
    fn documented_order() {
        // 1 frame, 2 channels, 2×4 image, 2×2 patches → 2 tokens
        let grid = TubeletGrid::new([1, 2, 2, 4], [1, 2, 2]).unwrap();
        let clip = Tensor::new(vec![1, 2, 2, 4], (0..16).map(f64::from).collect()).unwrap();
        let tok = tubelet_tokenize(&clip, &grid).unwrap();
        // token 0: pixels (0,0),(0,1),(1,0),(1,1), channel fastest
        assert_eq!(&tok.data()[..8], &[0.0, 8.0, 1.0, 9.0, 4.0, 12.0, 5.0, 13.0]);
        assert_eq!(&tok.data()[8..], &[2.0, 10.0, 3.0, 11.0, 6.0, 14.0, 7.0, 15.0]);
    }

    #[test]
    fn round_trip_and_zero() {
        let grid = TubeletGrid::new([6, 3, 32, 32], [2, 16, 16]).unwrap();
        let clip = Tensor::randn(vec![6, 3, 32, 32], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let tok = tubelet_tokenize(&clip, &grid).unwrap();
        assert_eq!(tok.shape(), &[12, 1536]);
        assert_eq!(tubelet_untokenize(&tok, &grid).unwrap(), clip);
        let zero = tubelet_untokenize(&Tensor::zeros(vec![12, 1536]).unwrap(), &grid).unwrap();
        assert!(zero.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let grid = TubeletGrid::new([2, 1, 4, 4], [1, 2, 2]).unwrap();
        assert!(tubelet_tokenize(&Tensor::zeros(vec![2, 1, 4, 8]).unwrap(), &grid).is_err());
        assert!(tubelet_untokenize(&Tensor::zeros(vec![8, 3]).unwrap(), &grid).is_err());
    }
}
