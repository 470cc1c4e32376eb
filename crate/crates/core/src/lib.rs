//! Numerical laboratory for symmetry breaking in double wells: how a tiny localized bump
//! collapses the ground state, with semiclassical and classical diagnostics.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod output;
pub mod phase_space;
pub mod potential;
pub mod quadrature;
pub mod spectral;
pub mod special;
pub mod tridiag;
pub mod two_level;
pub mod wkb;

pub use error::{Error, Result};
