//! Bound-state certificates for a spin-1/2 charged particle (g > 2) in a
//! radially symmetric, compact-support magnetic flux tube, plus an
//! independent radial eigensolver that verifies the certified states exist.
//!
//! The crate is organised along the pipeline:
//! [`fields`] (profiles and gauge data) → [`variational`] (per-channel
//! certificates) → [`spectrum`] (independent eigenvalue oracle) →
//! [`runner`]/[`report`] (batch execution and serialization), all resting
//! on [`specfun`] (Bessel functions and quadrature).

// `!(x > 0.0)`-style guards must stay as written: they reject NaN, which
// the suggested `x <= 0.0` would let through. Reference constants keep
// every published digit even past f64 resolution.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod config;
pub mod error;
pub mod fields;
pub mod report;
pub mod runner;
pub mod specfun;
pub mod spectrum;
pub mod variational;

pub use error::{FluxtubeError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
