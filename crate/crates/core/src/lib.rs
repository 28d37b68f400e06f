#![no_std]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod benign;
pub mod design;
pub mod design_elim;
pub mod error;
pub mod general;
pub mod hard;
pub mod jl;
pub mod linalg;
pub mod minimax;
pub mod model;
pub mod net;
pub mod param_elim;
pub mod random;
pub mod subsets;

pub use error::{Error, Result};
pub use model::{
    brute_force_best, query, uniform_error, BanditInstance, FeatureMatrix, NoiseKind, NoiseModel, QueryLedger,
    SparseEstimate, SparseParameter,
};
