//! File formats, measurement, fixtures, and the command-line pipeline for
//! the auscult lung-sound toolkit.
//!
//! The algorithmic core (tensors, networks, dataset logic, metrics) lives in
//! [`auscult_core`]; this crate adds everything that touches the filesystem
//! or a clock:
//!
//! - [`wav`]: RIFF/WAV decoding (PCM 8/16/24-bit and float32) and writing
//! - [`manifest`]: the dataset manifest and annotation formats
//! - [`framefile`]: persisted frame tensors with provenance sidecars
//! - [`modelfile`]: checksummed model serialization
//! - [`configfile`]: TOML model configs and pipeline defaults
//! - [`bench`]: wall-clock latency measurement and deployment reports
//! - [`report`]: evaluation reports and loss histories
//! - [`fixtures`]: deterministic synthetic datasets for tests and demos
//! - [`cli`]: the `auscult` command-line interface

pub mod bench;
pub mod cli;
pub mod configfile;
pub mod error;
pub mod fixtures;
pub mod framefile;
pub mod manifest;
pub mod modelfile;
pub mod report;
pub mod wav;

pub use error::{AppError, Result};
