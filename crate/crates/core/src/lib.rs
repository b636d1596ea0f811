//! Learning-guided synthesis of straight-line x86 programs from
//! input/output examples.
//!
//! The pipeline, bottom to top:
//!
//! - [`machine`] — deterministic simulator and AT&T text codec for the
//!   reduced instruction set, plus enumeration of the legal action space.
//! - [`taskgen`] — pilot-program task generation and the failure-weighted
//!   task pool.
//! - [`nn`] — policy and value networks, state encoding, training losses,
//!   and a small reverse-mode gradient engine.
//! - [`mcts`] — policy/value-guided Monte Carlo tree search that assembles
//!   programs one committed instruction at a time.
//! - [`trainer`] — imitation pretraining and the interleaved policy/value
//!   training loop with multi-temperature episode collection.
//! - [`bench`] — hand-designed evaluation suites and the four baselines.
//!
//! The crate is `no_std` (with `alloc`); file formats and the CLI live in
//! the companion `autoasm` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bench;
pub mod machine;
pub mod mcts;
pub mod nn;
pub mod seeds;
pub mod taskgen;
pub mod trainer;
