#![no_std]
// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;

pub mod error;
pub mod linalg;
pub mod mps;
pub mod states;
pub mod hamiltonian;
pub mod schedule;
pub mod tebd;
pub mod ed;
pub mod analysis;

pub use error::{Error, Result};
