//! Config-driven batch front end for `phasedyn`: ensemble runs, parameter
//! sweeps, oracle runs, marginal grids and a self-test.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod selftest;

pub use commands::Overrides;
