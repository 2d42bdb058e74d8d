//! Trained-model serialization.
//!
//! Layout: magic `AUSCMDL1`, header length `u32` little-endian, a JSON
//! header (format version, input shape, auxiliary ports, layer list, and
//! per-layer parameter shapes), the parameter blob (f32 little-endian, layer
//! order, weight then bias), and a trailing SHA-256 over everything before
//! it. Loading verifies the magic, version, checksum, and that the stored
//! parameter shapes match the graph the header describes, so a corrupted or
//! mismatched file fails loudly instead of mis-predicting quietly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use auscult_core::nn::{LayerParams, LayerSpec, ModelGraph};
use auscult_core::tensor::Tensor;

use crate::error::{AppError, Result};

const MODEL_MAGIC: &[u8; 8] = b"AUSCMDL1";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    input_shape: Vec<usize>,
    aux_ports: BTreeMap<String, usize>,
    layers: Vec<LayerSpec>,
    /// `(weight shape, bias shape)` per layer, `None` for layers without
    /// parameters.
    param_shapes: Vec<Option<(Vec<usize>, Vec<usize>)>>,
}

/// Serializes a trained `f32` graph. Identical graphs produce identical
/// bytes.
pub fn save_model(graph: &ModelGraph<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let header = Header {
        format_version: FORMAT_VERSION,
        input_shape: graph.input_shape().to_vec(),
        aux_ports: graph.aux_ports().clone(),
        layers: graph.layers().to_vec(),
        param_shapes: graph
            .params()
            .iter()
            .map(|slot| {
                slot.as_ref()
                    .map(|p| (p.weight.shape().to_vec(), p.bias.shape().to_vec()))
            })
            .collect(),
    };
    let header_json =
        serde_json::to_vec(&header).map_err(|e| AppError::format(path, format!("{e}")))?;
    let mut bytes = Vec::new();
    bytes.extend_from_slice(MODEL_MAGIC);
    bytes.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&header_json);
    for slot in graph.params().iter().flatten() {
        for &v in slot.weight.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        for &v in slot.bias.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&bytes);
    bytes.extend_from_slice(&digest);
    fs::write(path, bytes).map_err(|e| AppError::io(path, e))
}

/// Loads a model saved by [`save_model`], verifying checksum and shapes.
pub fn load_model(path: impl AsRef<Path>) -> Result<ModelGraph<f32>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    if bytes.len() < 12 + 32 || &bytes[0..8] != MODEL_MAGIC {
        return Err(AppError::format(path, "not a model file (bad magic)"));
    }
    let (body, stored_digest) = bytes.split_at(bytes.len() - 32);
    let digest = Sha256::digest(body);
    if digest.as_slice() != stored_digest {
        return Err(AppError::format(path, "checksum mismatch: file is corrupted"));
    }
    let header_len = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize;
    if body.len() < 12 + header_len {
        return Err(AppError::format(path, "truncated header"));
    }
    let header: Header = serde_json::from_slice(&body[12..12 + header_len])
        .map_err(|e| AppError::format(path, format!("bad header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(AppError::format(
            path,
            format!(
                "format version {} not supported (expected {FORMAT_VERSION})",
                header.format_version
            ),
        ));
    }
    if header.param_shapes.len() != header.layers.len() {
        return Err(AppError::format(
            path,
            "header parameter shapes do not match the layer list",
        ));
    }
    let mut blob = &body[12 + header_len..];
    let mut take = |n: usize| -> Result<Vec<f32>> {
        if blob.len() < n * 4 {
            return Err(AppError::format(path, "parameter blob shorter than declared shapes"));
        }
        let (head, rest) = blob.split_at(n * 4);
        blob = rest;
        Ok(head
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    };
    let mut params: Vec<Option<LayerParams<f32>>> = Vec::with_capacity(header.layers.len());
    for shapes in &header.param_shapes {
        match shapes {
            None => params.push(None),
            Some((w_shape, b_shape)) => {
                let w_len: usize = w_shape.iter().product();
                let b_len: usize = b_shape.iter().product();
                let weight = Tensor::new(w_shape.clone(), take(w_len)?)
                    .map_err(|e| AppError::format(path, format!("{e}")))?;
                let bias = Tensor::new(b_shape.clone(), take(b_len)?)
                    .map_err(|e| AppError::format(path, format!("{e}")))?;
                params.push(Some(LayerParams { weight, bias }));
            }
        }
    }
    if !blob.is_empty() {
        return Err(AppError::format(path, "parameter blob longer than declared shapes"));
    }
    // from_parts revalidates every layer shape against the stored parameters.
    ModelGraph::from_parts(header.input_shape, header.aux_ports, header.layers, params)
        .map_err(AppError::from)
}
