//! Motion infilling with a convolutional denoising autoencoder.
//!
//! A pose sequence is a 69×T matrix (22 root-relative joints plus three root
//! velocity rows) treated as a 1-channel image. A five-unit convolutional
//! autoencoder, trained to reconstruct clips from curriculum-masked inputs,
//! fills arbitrary gaps, recovers dropped joints, and denoises corrupted
//! motion in a single forward pass. Everything numeric — kernels, backprop,
//! optimizer — is implemented explicitly in this crate and verified against
//! oracles in the test suite.

pub mod error;
pub mod eval;
pub mod mask;
pub mod model;
pub mod motion;
pub mod nn;
pub mod seeds;
pub mod tasks;
pub mod train;
pub mod tensor;

pub use error::{Error, Result};
