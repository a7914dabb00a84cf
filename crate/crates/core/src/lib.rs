#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod params;
pub mod pmf;
pub mod quadrature;
pub mod rng;
pub mod simulator;
pub mod special_fn;

pub use error::{Error, Result};
