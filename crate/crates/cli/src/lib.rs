//! File formats and batch commands for fractional Gaussian belief
//! propagation.

pub mod cli;
pub mod commands;
pub mod model_io;
pub mod mtx;
pub mod sweep;

pub use commands::{execute, CommandError, Context, Outcome};
