//! On-disk frame storage: a flat binary tensor file plus sidecars.
//!
//! A frame set `<prefix>` is three files:
//!
//! - `<prefix>.bin` — tensor file: magic `AUSCTNSR`, version `u16`, dtype
//!   `u8` (1 = f32 little-endian), ndim `u8`, dims as `u64` little-endian,
//!   then the payload. Frames are stored as an `[n, len]` tensor.
//! - `<prefix>.tsv` — per-frame provenance: `index  subject_id  label
//!   offset_s`, one row per frame.
//! - `<prefix>.meta.json` — framing parameters (`sample_rate_hz`,
//!   `window_s`, `stride_s`) and the class list.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use auscult_core::audio::AudioFrame;
use auscult_core::dataset::Diagnosis;

use crate::error::{AppError, Result};

const TENSOR_MAGIC: &[u8; 8] = b"AUSCTNSR";
const TENSOR_VERSION: u16 = 1;
const DTYPE_F32: u8 = 1;

/// Writes a row-major f32 tensor.
pub fn write_tensor_f32(path: impl AsRef<Path>, shape: &[usize], data: &[f32]) -> Result<()> {
    let path = path.as_ref();
    let expected: usize = shape.iter().product();
    if expected != data.len() {
        return Err(AppError::format(
            path,
            format!("shape {shape:?} implies {expected} elements, got {}", data.len()),
        ));
    }
    let mut bytes = Vec::with_capacity(12 + shape.len() * 8 + data.len() * 4);
    bytes.extend_from_slice(TENSOR_MAGIC);
    bytes.extend_from_slice(&TENSOR_VERSION.to_le_bytes());
    bytes.push(DTYPE_F32);
    bytes.push(shape.len() as u8);
    for &d in shape {
        bytes.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| AppError::io(path, e))
}

/// Reads a tensor written by [`write_tensor_f32`].
pub fn read_tensor_f32(path: impl AsRef<Path>) -> Result<(Vec<usize>, Vec<f32>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    if bytes.len() < 12 || &bytes[0..8] != TENSOR_MAGIC {
        return Err(AppError::format(path, "not a tensor file (bad magic)"));
    }
    let version = u16::from_le_bytes([bytes[8], bytes[9]]);
    if version != TENSOR_VERSION {
        return Err(AppError::format(
            path,
            format!("unsupported tensor format version {version}"),
        ));
    }
    if bytes[10] != DTYPE_F32 {
        return Err(AppError::format(path, format!("unsupported dtype {}", bytes[10])));
    }
    let ndim = bytes[11] as usize;
    let header = 12 + ndim * 8;
    if bytes.len() < header {
        return Err(AppError::format(path, "truncated tensor header"));
    }
    let mut shape = Vec::with_capacity(ndim);
    for i in 0..ndim {
        let off = 12 + i * 8;
        let mut dim = [0u8; 8];
        dim.copy_from_slice(&bytes[off..off + 8]);
        shape.push(u64::from_le_bytes(dim) as usize);
    }
    let expected: usize = shape.iter().product();
    let payload = &bytes[header..];
    if payload.len() != expected * 4 {
        return Err(AppError::format(
            path,
            format!(
                "payload holds {} bytes, shape {shape:?} needs {}",
                payload.len(),
                expected * 4
            ),
        ));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((shape, data))
}

/// Framing parameters and the class list carried alongside a frame tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FramesMeta {
    pub sample_rate_hz: u32,
    pub window_s: f64,
    pub stride_s: f64,
    pub classes: Vec<String>,
}

fn bundle_paths(prefix: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let with_ext = |ext: &str| {
        let mut name = prefix.file_name().unwrap_or_default().to_os_string();
        name.push(ext);
        prefix.with_file_name(name)
    };
    (with_ext(".bin"), with_ext(".tsv"), with_ext(".meta.json"))
}

/// Writes a frame set under `<prefix>.{bin,tsv,meta.json}`.
pub fn write_frames(prefix: impl AsRef<Path>, frames: &[AudioFrame], meta: &FramesMeta) -> Result<()> {
    let prefix = prefix.as_ref();
    let (bin, tsv, meta_path) = bundle_paths(prefix);
    let len = frames.first().map_or(0, |f| f.samples.len());
    for (i, f) in frames.iter().enumerate() {
        if f.samples.len() != len {
            return Err(AppError::format(
                &bin,
                format!("frame {i} has {} samples, expected {len}", f.samples.len()),
            ));
        }
    }
    let mut data = Vec::with_capacity(frames.len() * len);
    for f in frames {
        data.extend_from_slice(&f.samples);
    }
    write_tensor_f32(&bin, &[frames.len(), len], &data)?;

    let mut sidecar = String::from("index\tsubject_id\tlabel\toffset_s\n");
    for (i, f) in frames.iter().enumerate() {
        sidecar.push_str(&format!(
            "{i}\t{}\t{}\t{}\n",
            f.subject_id,
            f.label.token(),
            f.source_offset_s
        ));
    }
    fs::write(&tsv, sidecar).map_err(|e| AppError::io(&tsv, e))?;

    let json = serde_json::to_string_pretty(meta)
        .map_err(|e| AppError::format(&meta_path, format!("{e}")))?;
    fs::write(&meta_path, json).map_err(|e| AppError::io(&meta_path, e))
}

/// Reads a frame set written by [`write_frames`].
pub fn read_frames(prefix: impl AsRef<Path>) -> Result<(Vec<AudioFrame>, FramesMeta)> {
    let prefix = prefix.as_ref();
    let (bin, tsv, meta_path) = bundle_paths(prefix);
    let (shape, data) = read_tensor_f32(&bin)?;
    if shape.len() != 2 {
        return Err(AppError::format(&bin, format!("expected a 2-D tensor, got {shape:?}")));
    }
    let (n, len) = (shape[0], shape[1]);

    let meta_text = fs::read_to_string(&meta_path).map_err(|e| AppError::io(&meta_path, e))?;
    let meta: FramesMeta = serde_json::from_str(&meta_text)
        .map_err(|e| AppError::format(&meta_path, format!("{e}")))?;

    let sidecar = fs::read_to_string(&tsv).map_err(|e| AppError::io(&tsv, e))?;
    let mut frames = Vec::with_capacity(n);
    let mut lines = sidecar.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(AppError::parse(&tsv, 1, "empty sidecar"));
    };
    if header != "index\tsubject_id\tlabel\toffset_s" {
        return Err(AppError::parse(&tsv, 1, format!("bad sidecar header '{header}'")));
    }
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(AppError::parse(&tsv, line_no, "expected 4 fields"));
        }
        let i: usize = fields[0]
            .parse()
            .map_err(|_| AppError::parse(&tsv, line_no, "bad index"))?;
        if i != frames.len() || i >= n {
            return Err(AppError::parse(
                &tsv,
                line_no,
                format!("index {i} out of order for {n} frames"),
            ));
        }
        let label = Diagnosis::from_token(fields[2]).ok_or_else(|| {
            AppError::parse(&tsv, line_no, format!("unknown class token '{}'", fields[2]))
        })?;
        let offset: f64 = fields[3]
            .parse()
            .map_err(|_| AppError::parse(&tsv, line_no, "bad offset"))?;
        frames.push(AudioFrame {
            samples: data[i * len..(i + 1) * len].to_vec(),
            subject_id: fields[1].to_string(),
            label,
            source_offset_s: offset,
        });
    }
    if frames.len() != n {
        return Err(AppError::format(
            &tsv,
            format!("sidecar lists {} frames, tensor holds {n}", frames.len()),
        ));
    }
    Ok((frames, meta))
}
