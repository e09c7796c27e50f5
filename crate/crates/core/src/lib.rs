//! Tree-structured retrieval: probabilistic label trees, beam search over
//! node scorers, and training with beam-aware pseudo targets.

pub mod beam;
pub mod cli;
pub mod error;
pub mod metrics;
pub mod pseudo;
pub mod rng;
pub mod scorer;
pub mod synth;
pub mod toy;
pub mod trainer;
pub mod tree;

pub use error::{Error, Result};
