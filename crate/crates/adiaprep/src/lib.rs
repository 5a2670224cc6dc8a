//! Command-line front end and file formats for the adiabatic preparation
//! toolkit: experiment manifests, sweeps over `(N, T)` cells, checkpoints,
//! run records and scaling fits.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod commands;
pub mod error;
pub mod manifest;
pub mod runner;
pub mod serial;

pub use error::{CliError, CliResult};
