// `!(x >= 0.0)` is used on purpose so NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diff_projection;
pub mod error;
pub mod experiments;
pub mod formulation;
pub mod grid;
pub mod nn;
pub mod solver;
pub mod training;

pub use error::{Error, Result};
