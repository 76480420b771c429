//! Desk-scale laboratory for the information-theoretic view of low-rank
//! matrix completion over a finite alphabet.
//!
//! A source `S = UV` is observed through `n` randomly chosen entries; the
//! crate enumerates, decodes, measures error rates, computes exact
//! entropies of the small instances, and evaluates the converse and
//! rate-distortion lower bounds in closed form.
//!
//! - [`model`]: the source model, exact arithmetic, seeding, enumeration
//! - [`sampling`]: observation patterns, coverage, balls-in-bins tails
//! - [`decoder`]: the uniqueness decoder and error-rate measurement
//! - [`entropy`]: exact entropies and the Fano checker
//! - [`bounds`]: closed-form lower bounds
//! - [`harness`]: sweeps, CSV/SVG output, threshold estimation

pub mod bounds;
pub mod decoder;
pub mod entropy;
mod error;
pub mod harness;
pub mod model;
pub mod sampling;

pub use error::{Error, Result};
