//! Numerical laboratory for scattering by compactly supported potentials in
//! three dimensions: forward solves, backscattering data, and the estimates
//! that control the difference of two potentials along complex frequencies.
//!
//! The guide in `book/` walks through each module with runnable examples.

pub mod cache;
pub mod config;
pub mod appendix;
pub mod error;
pub mod estimates;
pub mod fft;
pub mod geometry;
pub mod kernels;
pub mod potentials;
pub mod probe;
pub mod quadrature;
pub mod report;
pub mod solver;
pub mod suite;
pub mod transforms;

pub use error::{Error, Result};
