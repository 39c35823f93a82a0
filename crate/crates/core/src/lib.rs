//! Phase-space mapping dynamics for nonadiabatic quantum-classical systems.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod marginals;
pub mod models;
pub mod oracles;
pub mod phasespace;

pub use error::{Error, Result};
