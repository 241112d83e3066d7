//! Numerical laboratory for self-similar measures on the line, random walks
//! on the space of unimodular lattices `SL2(R)/SL2(Z)`, expanding horocycle
//! translates, and the counting of `psi`-approximable rationals.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bigfixed;
pub mod dio;
pub mod error;
pub mod homsp;
pub mod ifs;
pub mod seed;
pub mod stats;
pub mod translate;
pub mod walk;

pub use bigfixed::BigFixed;
pub use error::{Error, Result};
