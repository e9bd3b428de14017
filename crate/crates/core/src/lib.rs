//! Squared-error hybrid beamforming codebooks for dual-polarized uniform
//! planar arrays, with beam-pattern and data-rate evaluation.

// `!(x > tol)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array_geometry;
pub mod codebook;
pub mod codeword_design;
pub mod error;
pub mod hybrid_factorization;
pub mod ideal_pattern;
pub mod polarization_channel;
pub mod runner;
pub mod simulation;

pub use error::{Error, Result};
