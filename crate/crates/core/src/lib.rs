//! Unsupervised video anomaly detection by future-frame prediction.
//!
//! A clip of consecutive frames is cut into non-overlapping spatiotemporal
//! tubelets, embedded with a learnable projection, class token and
//! position table, encoded by a pre-norm Transformer, and decoded by a
//! progressively upsampling convolutional decoder into the next frame.
//! Frames whose prediction error is large are flagged as anomalous.

pub mod data;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
pub use numerics::Tensor;
