//! Integer-arithmetic-only entropy-model inference and deterministic entropy
//! coding for learned image compression.
//!
//! Everything on the coding path (network inference, parameter
//! discretization, CDF lookup and arithmetic coding) is integer arithmetic,
//! so an encoder and a decoder on different hosts derive identical
//! probability tables. Floating point only appears in offline work:
//! calibration, quantizer derivation and LUT construction.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod cdf;
pub mod codec;
pub mod discretize;
pub mod engine;
mod error;
pub mod quant;
pub mod requant;
pub mod round;

pub use error::{Error, Result};
