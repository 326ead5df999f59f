//! Synthetic-variation augmentation for artwork captioning datasets:
//! manifest handling, variation generation, alpha-mixed batch sampling,
//! embedding similarity statistics, caption metrics and retrieval recall.

pub mod augment;
pub mod capmetrics;
pub mod cli;
pub mod corpus;
pub mod embedstore;
pub mod retrieval;
pub mod sampler;
pub mod seed;
