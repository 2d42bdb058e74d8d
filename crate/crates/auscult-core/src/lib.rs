//! Core algorithms for the auscult lung-sound classification toolkit.
//!
//! This crate is `no_std` (with `alloc`) and holds everything that does not
//! touch the filesystem or a clock:
//!
//! - [`tensor`]: row-major tensors over `f32`/`f64`
//! - [`nn`]: the layer set, reverse-mode gradients, optimizers, and exact
//!   parameter/FLOP accounting
//! - [`model`]: builders for the raw-waveform audio classifier and its
//!   demographic late-fusion variant
//! - [`dataset`]: recording metadata, database statistics, device/class
//!   filtering, and subject-exclusive splitting
//! - [`audio`]: resampling and overlapping-window frame extraction
//! - [`train`] / [`eval`]: the training loop and classification metrics
//! - [`bench`]: latency/throughput/energy arithmetic for deployment reports
//!
//! File formats, WAV decoding, wall-clock measurement, and the command-line
//! interface live in the companion `auscult` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod audio;
pub mod bench;
pub mod dataset;
pub mod eval;
pub mod model;
pub mod nn;
pub mod tensor;
pub mod train;

pub use tensor::{Scalar, Tensor};
