//! Standard-library companion to `autoasm-core`: durable file formats
//! (pools, checkpoints, run configs, metrics) and the orchestration that the
//! `autoasm` binary drives.
//!
//! The core crate owns all numerics and stays allocation-only; everything
//! that touches the filesystem or wall clock lives here.

pub mod formats;
pub mod run;
