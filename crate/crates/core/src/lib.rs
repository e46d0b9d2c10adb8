//! Certified Wasserstein and total-variation error bounds for approximate
//! posteriors, computed from score differences alone.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificates;
pub mod cli;
pub mod coreset;
pub mod divergences;
pub mod error;
pub mod figures;
pub mod fisher;
pub mod laplace;
pub mod model;
pub mod oracle;
pub mod quadrature;

pub use error::{Error, Result};
