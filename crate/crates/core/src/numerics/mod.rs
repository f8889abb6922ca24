//! Dense `f64` arrays with a tape-based reverse-mode differentiator.
//!
//! Every primitive on [`Tape`] computes its forward value eagerly, checks it
//! for NaN/Inf and records itself. [`Tape::backward`] then walks the record
//! once in reverse. [`check`] holds the central finite-difference oracle the
//! tests use to validate the reverse sweep.

mod array;
pub mod check;
mod tape;

pub use array::{matmul, transpose, Array};
pub use tape::{Gradients, Tape, Var};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
}
