//! The network: tubelet tokenizer, embedding with class token and position
//! table, pre-norm Transformer encoder and upsampling convolutional decoder.

mod config;
mod forward;
mod params;
mod tokenize;

pub use config::{MlpActivation, ModelConfig, TubeletGrid};
pub use forward::{
    bind_weights, decoder_forward, decoder_on_tape, embed_on_tape, embed_sequence, encoder_forward, encoder_on_tape,
    forward_on_tape, predict_batch, predict_next_frame, EncoderTrace, Graph, Phase,
};
pub use params::{init_params, param_count, param_shapes, LayerWeights, ModelParams, StageWeights, Weights};
pub use tokenize::{tokenize_batch, tubelet_tokenize, tubelet_untokenize};
