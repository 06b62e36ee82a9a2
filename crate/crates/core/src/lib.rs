// `!(x > 0.0)` is used on purpose so NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correlation;
pub mod distfit;
pub mod error;
pub mod ingest;
pub mod marginal;
pub mod numeric;
pub mod returns;
pub mod synth;
pub mod windowing;

pub use error::{Error, Result};
