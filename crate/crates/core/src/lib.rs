#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod denoise;
pub mod error;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod linop;
pub mod par;
pub mod samplers;
pub mod schedule;
pub mod tensor;
pub mod theory;

pub use error::{Error, Result};
pub use tensor::{SeededRng, Tensor};
