//! Exact arithmetic: rationals, sparse polynomials, dense matrices.

pub mod matrix;
pub mod modular;
pub mod poly;
pub mod rat;
pub mod var;

use thiserror::Error;

pub use matrix::{minors, rank, rank_nullspace, rref, Determinant, Matrix};
pub use poly::{poly, Mono, Poly};
pub use rat::{int, parse_rat, rat, Rat};
pub use var::Var;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ExactError {
    #[error("no value for variable '{0}'")]
    MissingVariable(String),
    #[error("polynomial parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("minor size {t} out of range for a {rows}x{cols} matrix")]
    MinorSize { t: usize, rows: usize, cols: usize },
    #[error("modular nullspace did not lift to a certified rational basis")]
    Unlifted,
}
