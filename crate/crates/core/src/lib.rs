#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod directions;
pub mod error;
pub mod forward;
pub mod io;
pub mod monotonicity;
pub mod operators;
pub mod scene;
pub mod special;

pub use error::{Error, Result};
