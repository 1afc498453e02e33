//! q-Brownian motion calculus.

// Guards are written `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod measures;
pub mod poly;
pub mod process;
pub mod qcore;
pub mod qhermite;
pub mod qito;
pub mod scalar;
pub mod stochint;
pub mod verify;

pub use error::{QbmError, Result};
