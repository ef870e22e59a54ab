//! Deterministic dense-tensor kernel: forward ops, backward rules, a
//! reverse-mode tape and a finite-difference verifier.
//!
//! Everything here is single-threaded and reduces in a fixed order, so the
//! same inputs always produce bit-identical outputs.

pub mod gradcheck;
pub mod ops;
pub mod suite;
mod tape;
mod tensor;

pub use gradcheck::{finite_diff_check, GradCheckConfig, GradCheckReport, InputError};
pub use tape::{DifferentiableOp, Gradients, Tape, Var};
pub use tensor::Tensor;
