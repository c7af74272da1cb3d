//! Minimal dense-tensor arithmetic with reverse-mode differentiation.
//!
//! Enough to train the convolutional feature extractor and differentiate the
//! coherence losses: a value type ([`Tensor`]), pure forward kernels
//! ([`ops`]), a recording tape with one-shot backward ([`Tape`]), and a
//! finite-difference oracle ([`finite_diff_check`]).

pub mod check;
pub mod ops;
pub mod tape;
pub mod tensor;

pub use check::finite_diff_check;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
