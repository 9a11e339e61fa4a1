//! Optimal try-and-decide contract menus: solver, incentive verification and
//! Monte Carlo cross-validation.

// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assumptions;
pub mod cli;
pub mod contracts;
pub mod error;
pub mod model;
pub mod numerics;
pub mod simulate;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
