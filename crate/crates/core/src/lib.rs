//! Recover the causal order of multipartite quantum processes.

pub mod algorithms;
pub mod channel;
pub mod error;
pub mod random;
pub mod rng;
pub mod sampling;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
