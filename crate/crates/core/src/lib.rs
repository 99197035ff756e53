#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curves;
pub mod error;
pub mod kernel;
pub mod moduli;
pub mod periods;
pub mod projective;
pub mod quadrature;
pub mod special;

pub use curves::make_curve;
pub use error::{Error, ErrorCategory, Result};
