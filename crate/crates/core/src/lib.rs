// `!(x > 0.0)` is used throughout to reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod montecarlo;
pub mod special;

pub use error::{Error, Result};
