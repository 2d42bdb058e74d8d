//! Minimal RIFF/WAV reading and writing.
//!
//! Reading supports what the pipeline needs: PCM 8/16/24-bit integer and
//! 32-bit float, mono or stereo. Stereo collapses to mono by channel
//! averaging; amplitudes are scaled to `[-1, 1]`. Unknown chunks are
//! skipped. Writing emits 16-bit PCM mono (fixture and test support).

use std::fs;
use std::io::{Read, Seek, SeekFrom};
use std::path::Path;

use auscult_core::audio::Waveform;

use crate::error::{AppError, Result};

#[derive(Debug, Clone, Copy)]
struct Fmt {
    audio_format: u16,
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

impl Fmt {
    fn bytes_per_frame(&self) -> usize {
        (self.bits_per_sample as usize / 8) * self.channels as usize
    }
}

fn read_exact_or(
    reader: &mut impl Read,
    buf: &mut [u8],
    path: &Path,
    what: &str,
) -> Result<()> {
    reader
        .read_exact(buf)
        .map_err(|_| AppError::format(path, format!("truncated file while reading {what}")))
}

/// Scans RIFF chunks for `fmt ` and `data`, leaving the reader positioned at
/// the start of sample data. Returns the format and the declared data size.
fn read_header(reader: &mut (impl Read + Seek), path: &Path) -> Result<(Fmt, u32)> {
    let mut riff = [0u8; 12];
    read_exact_or(reader, &mut riff, path, "RIFF header")?;
    if &riff[0..4] != b"RIFF" || &riff[8..12] != b"WAVE" {
        return Err(AppError::format(path, "not a RIFF/WAVE file"));
    }
    let mut fmt: Option<Fmt> = None;
    loop {
        let mut chunk = [0u8; 8];
        if reader.read_exact(&mut chunk).is_err() {
            return Err(AppError::format(path, "no data chunk found"));
        }
        let id = &chunk[0..4];
        let size = u32::from_le_bytes([chunk[4], chunk[5], chunk[6], chunk[7]]);
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(AppError::format(path, "fmt chunk too small"));
                }
                let mut body = vec![0u8; size as usize];
                read_exact_or(reader, &mut body, path, "fmt chunk")?;
                fmt = Some(Fmt {
                    audio_format: u16::from_le_bytes([body[0], body[1]]),
                    channels: u16::from_le_bytes([body[2], body[3]]),
                    sample_rate: u32::from_le_bytes([body[4], body[5], body[6], body[7]]),
                    bits_per_sample: u16::from_le_bytes([body[14], body[15]]),
                });
                if size % 2 == 1 {
                    reader
                        .seek(SeekFrom::Current(1))
                        .map_err(|e| AppError::io(path, e))?;
                }
            }
            b"data" => {
                let fmt = fmt
                    .ok_or_else(|| AppError::format(path, "data chunk before fmt chunk"))?;
                validate_fmt(&fmt, path)?;
                return Ok((fmt, size));
            }
            _ => {
                let skip = size as i64 + (size % 2) as i64;
                reader
                    .seek(SeekFrom::Current(skip))
                    .map_err(|e| AppError::io(path, e))?;
            }
        }
    }
}

fn validate_fmt(fmt: &Fmt, path: &Path) -> Result<()> {
    match (fmt.audio_format, fmt.bits_per_sample) {
        (1, 8) | (1, 16) | (1, 24) | (3, 32) => {}
        (f, b) => {
            return Err(AppError::format(
                path,
                format!("unsupported encoding: format tag {f}, {b} bits per sample"),
            ))
        }
    }
    if !(1..=2).contains(&fmt.channels) {
        return Err(AppError::format(
            path,
            format!("unsupported channel count {}", fmt.channels),
        ));
    }
    if fmt.sample_rate == 0 {
        return Err(AppError::format(path, "zero sample rate"));
    }
    Ok(())
}

/// Decodes a WAV file to a mono waveform scaled to `[-1, 1]`.
pub fn decode_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let mut file = fs::File::open(path).map_err(|e| AppError::io(path, e))?;
    let (fmt, data_size) = read_header(&mut file, path)?;
    let mut data = vec![0u8; data_size as usize];
    if file.read_exact(&mut data).is_err() {
        return Err(AppError::format(path, "truncated data chunk"));
    }
    let frame_bytes = fmt.bytes_per_frame();
    if data.len() % frame_bytes != 0 {
        return Err(AppError::format(path, "data chunk not a whole number of frames"));
    }
    let n_frames = data.len() / frame_bytes;
    if n_frames == 0 {
        return Err(AppError::format(path, "file contains zero samples"));
    }
    let channels = fmt.channels as usize;
    let mut samples = Vec::with_capacity(n_frames);
    for frame in 0..n_frames {
        let mut acc = 0.0f32;
        for ch in 0..channels {
            let off = frame * frame_bytes + ch * (fmt.bits_per_sample as usize / 8);
            let v = match (fmt.audio_format, fmt.bits_per_sample) {
                (1, 8) => (data[off] as f32 - 128.0) / 128.0,
                (1, 16) => {
                    i16::from_le_bytes([data[off], data[off + 1]]) as f32 / 32768.0
                }
                (1, 24) => {
                    let raw = (data[off] as i32)
                        | ((data[off + 1] as i32) << 8)
                        | ((data[off + 2] as i32) << 16);
                    // Sign-extend 24 -> 32 bits.
                    let raw = (raw << 8) >> 8;
                    raw as f32 / 8_388_608.0
                }
                (3, 32) => f32::from_le_bytes([
                    data[off],
                    data[off + 1],
                    data[off + 2],
                    data[off + 3],
                ]),
                _ => unreachable!("validated in read_header"),
            };
            acc += v;
        }
        let mono = acc / channels as f32;
        if !mono.is_finite() {
            return Err(AppError::format(path, "non-finite sample value"));
        }
        samples.push(mono.clamp(-1.0, 1.0));
    }
    Waveform::new(samples, fmt.sample_rate).map_err(AppError::from)
}

/// Reads only the header and returns the recording duration in seconds.
pub fn wav_duration_s(path: impl AsRef<Path>) -> Result<f64> {
    let path = path.as_ref();
    let mut file = fs::File::open(path).map_err(|e| AppError::io(path, e))?;
    let (fmt, data_size) = read_header(&mut file, path)?;
    let frames = data_size as usize / fmt.bytes_per_frame();
    Ok(frames as f64 / fmt.sample_rate as f64)
}

/// Writes a mono 16-bit PCM WAV file.
pub fn write_wav_mono16(path: impl AsRef<Path>, samples: &[f32], sample_rate: u32) -> Result<()> {
    let path = path.as_ref();
    let data_size = (samples.len() * 2) as u32;
    let mut bytes = Vec::with_capacity(44 + samples.len() * 2);
    bytes.extend_from_slice(b"RIFF");
    bytes.extend_from_slice(&(36 + data_size).to_le_bytes());
    bytes.extend_from_slice(b"WAVE");
    bytes.extend_from_slice(b"fmt ");
    bytes.extend_from_slice(&16u32.to_le_bytes());
    bytes.extend_from_slice(&1u16.to_le_bytes()); // PCM
    bytes.extend_from_slice(&1u16.to_le_bytes()); // mono
    bytes.extend_from_slice(&sample_rate.to_le_bytes());
    bytes.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    bytes.extend_from_slice(&2u16.to_le_bytes());
    bytes.extend_from_slice(&16u16.to_le_bytes());
    bytes.extend_from_slice(b"data");
    bytes.extend_from_slice(&data_size.to_le_bytes());
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| AppError::io(path, e))
}
