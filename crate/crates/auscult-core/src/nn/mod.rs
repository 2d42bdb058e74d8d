//! A compact neural-network engine.
//!
//! The layer set is exactly what the raw-waveform classifier needs: 1-D and
//! 2-D convolutions, non-overlapping max-pooling, dense layers, ReLU,
//! stabilized softmax, shape adapters, and a concatenation point for an
//! auxiliary input vector. Graphs are sequential chains with named auxiliary
//! ports; [`graph::ModelGraph::backward`] produces exact reverse-mode
//! gradients for every parameter and input.

pub mod cost;
pub mod gradcheck;
pub mod graph;
pub mod layer;
pub mod optim;

use alloc::string::String;

pub use cost::{count_cost, CostReport, LayerCost, FLOP_CONVENTION};
pub use graph::{Gradients, GraphBuilder, LayerParams, ModelGraph, Tape};
pub use layer::LayerSpec;
pub use optim::{Adam, Sgd};

/// Errors from graph construction, inference, and training arithmetic.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    /// A layer's input (or configuration) is incompatible with its spec.
    #[error("layer {index} ({kind}): {detail}")]
    Shape {
        index: usize,
        kind: String,
        detail: String,
    },
    /// A layer produced NaN or infinite values.
    #[error("layer {index} ({kind}): non-finite values in output")]
    NonFinite { index: usize, kind: String },
    /// An auxiliary input port was missing or unexpected.
    #[error("auxiliary port '{port}': {detail}")]
    Port { port: String, detail: String },
    /// Parameter and gradient sets do not line up.
    #[error("parameter/gradient mismatch at layer {index}: {detail}")]
    ParamMismatch { index: usize, detail: String },
    #[error("{0}")]
    Invalid(String),
}
