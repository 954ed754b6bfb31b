//! Reverse-mode automatic differentiation over dense `f64` arrays.
//!
//! The tape records operations as they run and replays them backwards.
//! The primitive set is closed (see [`Primitive`]); everything the machine
//! computes is composed from it, so gradient checking [`Primitive::DIFFERENTIABLE`]
//! plus one end-to-end step covers every differentiable path.

mod array;
mod gradcheck;
mod tape;

pub use array::Array;
pub use gradcheck::{finite_difference_check, finite_difference_check_with, GradCheckReport};
pub use tape::{Gradients, Primitive, Tape, Var, COSINE_GUARD};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("domain violation in {op}: {detail}")]
    Domain { op: &'static str, detail: String },
    #[error("loss must be scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("shape {0:?} has a zero dimension")]
    InvalidShape(Vec<usize>),
    #[error("shape {shape:?} needs {expected} entries, got {actual}")]
    BadLength {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("builder is not deterministic: loss {first} then {second}")]
    NonDeterministic { first: f64, second: f64 },
    #[error("{0}")]
    InvalidArgument(String),
}
