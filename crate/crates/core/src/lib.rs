//! Gaussian Markov random fields, fractional Gaussian belief propagation and
//! the moment-parameterized (fractional) Bethe free energy.
//!
//! `no_std` with `alloc`; dense linear algebra through `nalgebra`.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bp;
pub mod energy;
pub mod error;
pub mod gmrf;
pub mod kregular;
pub mod linalg;
pub mod marginals;
mod math;
pub mod newton;
pub mod stability;

pub use error::{Error, Result};
pub use marginals::MomentMarginals;
