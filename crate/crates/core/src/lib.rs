//! Measure social bias encoded in text corpora.
//!
//! Embedding spaces are trained with skip-gram negative sampling, pooled
//! from contextual vector streams, or imported from text files, then scored
//! with WEAT effect sizes and word-similarity benchmarks. The harness runs
//! whole experiment grids over political orientation and publication year.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision for common uses.

pub mod bias;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod harness;
pub mod pool;
pub mod scalar;
pub mod sgns;
pub mod similarity;
pub mod synthetic;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Single-precision embedding space, the default for training and import.
pub type Embeddings = embedding::EmbeddingSpace<f32>;
/// Double-precision embedding space, used where results are checked against
/// oracles at tight tolerances.
pub type Embeddings64 = embedding::EmbeddingSpace<f64>;
pub type Trained = sgns::Trained<f32>;
pub type Trained64 = sgns::Trained<f64>;
pub type PoolAccumulator = pool::PoolAccumulator<f32>;
pub type PoolAccumulator64 = pool::PoolAccumulator<f64>;
