//! Self-supervised gait encoding from 3D skeleton sequences.
//!
//! An encoder-decoder LSTM pair learns to reconstruct skeleton
//! sequences in reverse order; locality-aware attention over the
//! encoder states yields fixed-width gait encodings that a small
//! softmax recognizer turns into multi-shot person re-identification
//! scores. Everything is plain-Rust f64 with hand-written gradients,
//! deterministic for a fixed seed.

pub mod artifacts;
pub mod attention;
pub mod error;
pub mod manifest;
pub mod numerics;
pub mod reid;
pub mod rng;
pub mod seq2seq;
pub mod skeldata;
pub mod trainer;

pub use error::{GaitError, Result};
