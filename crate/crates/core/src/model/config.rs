use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MlpActivation {
    #[default]
    Gelu,
    Relu,
}

/// Network geometry and hyperparameters.
///
/// The default is the full-size network: six 256×256 RGB input frames,
/// 2×16×16 tubelets, width 768, two encoder layers with six heads, MLP
/// width 4096, and a decoder that grows an 8×8×512 grid through five
/// upsampling stages to 256×256.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Input frames per clip (`T`).
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub tubelet_t: usize,
    pub patch_h: usize,
    pub patch_w: usize,
    /// Token width `K`.
    pub embed_dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub mlp_size: usize,
    pub mlp_activation: MlpActivation,
    /// Hidden width of the first expansion layer.
    pub fc_hidden: usize,
    /// Side of the square grid the expansion layers reshape into.
    pub decoder_base: usize,
    /// `[C₀, C₁, …, C_S]`: grid channels, then the output width of each of
    /// the `S` upsampling stages.
    pub decoder_channels: Vec<usize>,
    /// Frames emitted by the decoder (1, or `frames` for multi-frame reconstruction).
    pub output_frames: usize,
    pub ln_eps: f64,
    pub bn_eps: f64,
    pub bn_momentum: f64,
    /// Reserved; must be 0.
    pub dropout: f64,
    pub init_std: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            frames: 6,
            height: 256,
            width: 256,
            channels: 3,
            tubelet_t: 2,
            patch_h: 16,
            patch_w: 16,
            embed_dim: 768,
            layers: 2,
            heads: 6,
            mlp_size: 4096,
            mlp_activation: MlpActivation::Gelu,
            fc_hidden: 2048,
            decoder_base: 8,
            decoder_channels: vec![512, 256, 128, 64, 32, 16],
            output_frames: 1,
            ln_eps: 1e-5,
            bn_eps: 1e-5,
            bn_momentum: 0.1,
            dropout: 0.0,
            init_std: 0.02,
            seed: 0,
        }
    }
}

/// Tubelet partition of a clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TubeletGrid {
    pub n_t: usize,
    pub n_h: usize,
    pub n_w: usize,
    pub t: usize,
    pub h: usize,
    pub w: usize,
    pub channels: usize,
}

impl TubeletGrid {
    pub fn new(clip: [usize; 4], tubelet: [usize; 3]) -> Result<Self> {
        let [tt, c, hh, ww] = clip;
        let [t, h, w] = tubelet;
        if clip.contains(&0) || tubelet.contains(&0) {
            return Err(Error::Shape(format!("clip {clip:?} and tubelet {tubelet:?} must be positive")));
        }
        if tt % t != 0 || hh % h != 0 || ww % w != 0 {
            return Err(Error::Shape(format!(
                "tubelet {t}×{h}×{w} does not tile clip {tt}×{hh}×{ww}"
            )));
        }
        Ok(Self {
            n_t: tt / t,
            n_h: hh / h,
            n_w: ww / w,
            t,
            h,
            w,
            channels: c,
        })
    }

    /// Token count `N`.
    pub fn tokens(&self) -> usize {
        self.n_t * self.n_h * self.n_w
    }

    pub fn token_dim(&self) -> usize {
        self.t * self.h * self.w * self.channels
    }

    /// `[T, C, H, W]` of the clip this grid partitions.
    pub fn clip_shape(&self) -> [usize; 4] {
        [self.n_t * self.t, self.channels, self.n_h * self.h, self.n_w * self.w]
    }
}

impl ModelConfig {
    /// Six 64×64 grayscale frames, small enough to train on one CPU core.
    pub fn desk() -> Self {
        Self {
            height: 64,
            width: 64,
            channels: 1,
            embed_dim: 64,
            heads: 4,
            mlp_size: 128,
            fc_hidden: 128,
            decoder_base: 4,
            decoder_channels: vec![32, 16, 16, 8, 8],
            ..Self::default()
        }
    }

    /// Two 8×8 grayscale frames, width 8, one layer with two heads.
    pub fn tiny() -> Self {
        Self {
            frames: 2,
            height: 8,
            width: 8,
            channels: 1,
            tubelet_t: 2,
            patch_h: 4,
            patch_w: 4,
            embed_dim: 8,
            layers: 1,
            heads: 2,
            mlp_size: 16,
            fc_hidden: 16,
            decoder_base: 2,
            decoder_channels: vec![4, 4, 3],
            ..Self::default()
        }
    }

    pub fn grid(&self) -> Result<TubeletGrid> {
        TubeletGrid::new(
            [self.frames, self.channels, self.height, self.width],
            [self.tubelet_t, self.patch_h, self.patch_w],
        )
    }

    pub fn decoder_stages(&self) -> usize {
        self.decoder_channels.len().saturating_sub(1)
    }

    /// Channels of the decoder output: `channels · output_frames`.
    pub fn output_channels(&self) -> usize {
        self.channels * self.output_frames
    }

    pub fn output_shape(&self) -> [usize; 3] {
        [self.output_channels(), self.height, self.width]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.channels != 1 && self.channels != 3 {
            return bad(format!("channels must be 1 or 3, got {}", self.channels));
        }
        self.grid().map_err(|e| Error::Config(e.to_string()))?;
        if self.embed_dim == 0 || self.heads == 0 || !self.embed_dim.is_multiple_of(self.heads) {
            return bad(format!("embed_dim {} must be a positive multiple of heads {}", self.embed_dim, self.heads));
        }
        if self.mlp_size == 0 || self.fc_hidden == 0 {
            return bad("mlp_size and fc_hidden must be positive".into());
        }
        if self.decoder_channels.len() < 2 || self.decoder_channels.contains(&0) {
            return bad("decoder_channels needs the grid width plus at least one positive stage width".into());
        }
        let side = self.decoder_base.checked_shl(self.decoder_stages() as u32).unwrap_or(0);
        if self.decoder_base == 0 || side != self.height || side != self.width {
            return bad(format!(
                "decoder base {} with {} stages yields {side}×{side}, frames are {}×{}",
                self.decoder_base,
                self.decoder_stages(),
                self.height,
                self.width
            ));
        }
        if self.output_frames != 1 && self.output_frames != self.frames {
            return bad(format!("output_frames must be 1 or {}, got {}", self.frames, self.output_frames));
        }
        if !(self.ln_eps > 0.0 && self.bn_eps > 0.0) {
            return bad("normalization eps must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.bn_momentum) {
            return bad(format!("bn_momentum {} outside [0, 1]", self.bn_momentum));
        }
        if self.dropout != 0.0 {
            return bad("dropout is not supported; leave it at 0".into());
        }
        if !(self.init_std > 0.0 && self.init_std.is_finite()) {
            return bad("init_std must be positive".into());
        }
        Ok(())
    }
}
