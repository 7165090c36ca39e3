//! Heat kernels of critical non-local operators with drift.

pub mod base_kernels;
pub mod cli;
pub mod error;
pub mod interp;
pub mod linalg;
pub mod parametrix;
pub mod quad;
pub mod resolvent;
pub mod sde_sim;
pub mod special;
pub mod verifiers;

pub use error::{Error, Result};
