//! Transfer Elastic Net: estimator, theoretical bounds and simulation harness.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod grouping;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod registry;
pub mod solver;

pub use error::{Error, Result};
