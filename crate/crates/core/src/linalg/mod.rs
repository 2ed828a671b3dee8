//! Conjugate gradients over matrix-free SPD operators, plus the small dense
//! toolkit the verification routines use for exact reference solves.

mod cg;
mod dense;

pub use cg::{cg_solve, CgOptions, CgOutcome, DEFAULT_RESIDUAL_TOL};
pub use dense::DenseMatrix;
