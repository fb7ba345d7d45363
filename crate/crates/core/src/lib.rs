// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domains;
pub mod eigenmatrix;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod numerics;
pub mod recovery;
pub mod refine;

pub use error::{Error, Result};
