//! Numerical laboratory for the variable-energy multi-scale analysis of
//! discrete random Schrödinger operators and the strong dynamical
//! localization it implies.
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`]: lattice cubes, interior/boundary regions, scale grids, annuli.
//! - [`disorder`]: single-site measures and reproducible per-site configurations.
//! - [`operators`]: finite-volume Hamiltonians, spectra, resolvent blocks, propagator.
//! - [`msa`]: cube classification, Monte Carlo estimates of the two-cube and
//!   Wegner properties, parameter gates and the scale ladder.
//! - [`localization`]: centers of localization, eigenfunction decay checks,
//!   kernel decay and dynamical moments.
//! - [`cli`]: experiment files, run directories, manifests and reports.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod banded;
pub mod cli;
pub mod disorder;
pub mod error;
pub mod geometry;
pub mod io;
pub mod lanczos;
pub mod localization;
pub mod msa;
pub mod operators;
pub mod stats;

pub use error::{Error, Result};
