//! Tag-aware hybrid recommendation.
//!
//! A hierarchical attention network is trained to predict the social tags of
//! research papers from their titles and abstracts. Its pooled document vectors
//! are then fed as item metadata into a feature-based matrix factorization model
//! trained with WARP or BPR, and the result is scored with Recall@K under a
//! leave-P-in split.
//!
//! Module map:
//!
//! * [`corpus`]: interaction and document parsing, vocabularies, train/test split.
//! * [`features`]: identity, tag one-hot and TF-IDF item features, dense embeddings.
//! * [`encoder`]: the hierarchical attention network and its trainer.
//! * [`factorization`]: the hybrid MF model with BPR and WARP updates.
//! * [`evaluation`]: candidate ranking, Recall@K and the paired t-test.
//! * [`config`] and [`pipeline`]: the declarative config and the stage drivers used by the CLI.

pub mod config;
pub mod corpus;
pub mod encoder;
mod error;
pub mod evaluation;
pub mod factorization;
pub mod features;
pub mod pipeline;
pub mod rng;
pub mod synthetic;

pub use error::{Error, Result};
