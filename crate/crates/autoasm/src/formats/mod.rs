//! On-disk formats. Text formats (pools, configs, metrics) are
//! newline-delimited and versioned by a header line; checkpoints are binary
//! with a magic prefix. Every reader rejects unknown versions instead of
//! guessing.

pub mod checkpoint;
pub mod config;
pub mod metrics;
pub mod pool;
