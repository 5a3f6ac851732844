// `!(x > 0.0)` style checks reject NaN together with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod copula;
pub mod data;
pub mod decisions;
pub mod error;
pub mod linalg;
pub mod pipeline;
pub mod point;
pub mod prob;
pub mod sim;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
