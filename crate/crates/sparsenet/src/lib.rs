//! Random sparse deep threshold networks: generation, sampling, and
//! layerwise recovery from observed samples.

pub mod correlation;
pub mod encoding;
pub mod error;
pub mod graphprops;
pub mod graphrecovery;
pub mod netmodel;
pub mod rng;
pub mod separation;
pub mod weightlearning;

pub use error::{Error, Result};
pub use netmodel::{DeepNet, DeepNetParams, Observed, OutputMode, Sample, SignedBipartiteGraph, SparseBinaryVector, WeightMode};
