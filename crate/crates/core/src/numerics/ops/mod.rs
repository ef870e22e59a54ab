//! Forward kernels and their vector-Jacobian products.

mod activation;
mod attention;
mod conv;
pub(crate) mod linalg;
mod norm;
mod structural;

pub use activation::{softmax, Gelu, Relu, Sigmoid, Softmax};
pub use attention::{multi_head_attention, MultiHeadAttention};
pub use conv::{conv2d, upsample_nn_2x, Conv2d, Upsample2x};
pub use linalg::{matmul, Add, AddBroadcast, MatMul};
pub use norm::{batch_norm, channel_moments, layer_norm, BatchNorm, BnMode, LayerNorm, RunningStats};
pub use structural::{MeanSquaredError, PrependRow, Reshape, SelectRow};
