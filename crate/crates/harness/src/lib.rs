#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod hard_spec;
pub mod instance_file;
pub mod runner;

pub use error::{HarnessError, Result};
