//! Waveforms, resampling, and overlapping-window frame extraction.
//!
//! Recordings are chopped into fixed-length frames of `window_s` seconds at a
//! stride of `stride_s`; adjacent frames overlap by `window_s - stride_s`.
//! The tail shorter than one stride is discarded, so a 20 s recording framed
//! at 5 s / 1 s yields exactly 16 frames.

use alloc::string::String;
use alloc::vec::Vec;


use crate::dataset::{Diagnosis, RecordingMeta};

/// Default frame window in seconds.
pub const DEFAULT_WINDOW_S: f64 = 5.0;
/// Default frame stride in seconds.
pub const DEFAULT_STRIDE_S: f64 = 1.0;
/// Default pipeline sample rate; 5 s frames then hold 220500 samples.
pub const DEFAULT_SAMPLE_RATE_HZ: u32 = 44_100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AudioError {
    #[error("waveform has no samples")]
    Empty,
    #[error("waveform contains non-finite samples")]
    NonFinite,
    #[error("waveform amplitude {0} outside [-1, 1]")]
    OutOfRange(f32),
    #[error("sample rate must be positive")]
    ZeroRate,
}

/// Mono waveform with amplitudes in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    samples: Vec<f32>,
    sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate_hz: u32) -> Result<Self, AudioError> {
        if samples.is_empty() {
            return Err(AudioError::Empty);
        }
        if sample_rate_hz == 0 {
            return Err(AudioError::ZeroRate);
        }
        for &s in &samples {
            if !s.is_finite() {
                return Err(AudioError::NonFinite);
            }
            if !(-1.0..=1.0).contains(&s) {
                return Err(AudioError::OutOfRange(s));
            }
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

/// Linear-interpolation resampling. Output length is
/// `round(len * target / source)`; a source-rate target returns the input
/// unchanged. Linear interpolation of in-range samples stays in range.
pub fn resample(w: &Waveform, target_hz: u32) -> Result<Waveform, AudioError> {
    if target_hz == 0 {
        return Err(AudioError::ZeroRate);
    }
    if target_hz == w.sample_rate_hz {
        return Ok(w.clone());
    }
    let src = w.samples();
    let ratio = target_hz as f64 / w.sample_rate_hz as f64;
    let out_len = ((src.len() as f64 * ratio).round() as usize).max(1);
    let step = w.sample_rate_hz as f64 / target_hz as f64;
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let pos = i as f64 * step;
        let left = pos.floor() as usize;
        if left + 1 >= src.len() {
            out.push(src[src.len() - 1]);
        } else {
            let frac = (pos - left as f64) as f32;
            out.push(src[left] + (src[left + 1] - src[left]) * frac);
        }
    }
    Waveform::new(out, target_hz)
}

/// Result of the frame-count formula `floor((duration - window) / stride) + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameCount {
    pub frames: usize,
    /// Set when the window is longer than the recording (count is then zero).
    pub window_exceeds_duration: bool,
}

/// Number of overlapping frames of `window_s` at `stride_s` that fit in
/// `duration_s`. A window longer than the recording yields zero frames with
/// the warning flag set rather than an error.
pub fn frame_count(duration_s: f64, window_s: f64, stride_s: f64) -> FrameCount {
    assert!(window_s > 0.0, "window must be positive");
    assert!(stride_s > 0.0, "stride must be positive");
    // The epsilon absorbs float noise in durations like 0.1 * n so that exact
    // multiples (20 s at 5 s / 1 s) count exactly.
    if window_s > duration_s + 1e-9 {
        return FrameCount {
            frames: 0,
            window_exceeds_duration: true,
        };
    }
    let frames = (((duration_s - window_s) / stride_s) + 1e-9).floor() as usize + 1;
    FrameCount {
        frames,
        window_exceeds_duration: false,
    }
}

/// A fixed-length mono window cut from one recording.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioFrame {
    pub samples: Vec<f32>,
    pub subject_id: String,
    pub label: Diagnosis,
    /// Offset of the frame start within the source recording, in seconds.
    pub source_offset_s: f64,
}

/// Frames extracted from one recording, plus the too-short warning.
#[derive(Clone, Debug, PartialEq)]
pub struct FramingOutcome {
    pub frames: Vec<AudioFrame>,
    pub window_exceeds_duration: bool,
}

/// Cuts `w` into overlapping frames carrying the recording's subject and
/// label. Frame `i` starts at `i * stride_s`; every frame is a contiguous
/// slice of the source and never crosses the recording boundary.
pub fn extract_frames(
    w: &Waveform,
    meta: &RecordingMeta,
    window_s: f64,
    stride_s: f64,
) -> FramingOutcome {
    let rate = w.sample_rate_hz() as f64;
    let window_n = ((window_s * rate).round() as usize).max(1);
    let stride_n = ((stride_s * rate).round() as usize).max(1);
    let counted = frame_count(w.duration_s(), window_s, stride_s);
    // Seconds-domain and sample-domain counts agree except at float razor
    // edges; the sample-domain bound keeps every frame inside the recording.
    let fit = if w.len() >= window_n {
        (w.len() - window_n) / stride_n + 1
    } else {
        0
    };
    let n_frames = counted.frames.min(fit);
    let mut frames = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let start = i * stride_n;
        frames.push(AudioFrame {
            samples: w.samples()[start..start + window_n].to_vec(),
            subject_id: meta.subject_id.clone(),
            label: meta.diagnosis,
            source_offset_s: start as f64 / rate,
        });
    }
    FramingOutcome {
        frames,
        window_exceeds_duration: counted.window_exceeds_duration,
    }
}

/// In-place peak normalization: divide by `max(|x|, epsilon)`.
///
/// Applied per frame at model input so heterogeneous recording levels train
/// on a common scale; stored frames stay raw.
pub fn normalize_peak(samples: &mut [f32]) {
    let mut peak = 0.0f32;
    for &s in samples.iter() {
        let a = s.abs();
        if a > peak {
            peak = a;
        }
    }
    let denom = peak.max(1e-8);
    for s in samples.iter_mut() {
        *s /= denom;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Device, Sex};
    use alloc::vec;

    fn meta(duration_s: f64) -> RecordingMeta {
        RecordingMeta::new(
            "s1".into(),
            Diagnosis::Copd,
            Device::Meditron,
            60.0,
            Sex::F,
            "s1.wav".into(),
            duration_s,
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn frame_count_formula() {
        assert_eq!(frame_count(20.0, 5.0, 1.0).frames, 16);
        assert_eq!(frame_count(5.0, 5.0, 1.0).frames, 1);
        assert_eq!(frame_count(7.5, 5.0, 1.0).frames, 3);
        let short = frame_count(3.0, 5.0, 1.0);
        assert_eq!(short.frames, 0);
        assert!(short.window_exceeds_duration);
    }

    #[test]
    fn resample_identity_at_source_rate() {
        let w = Waveform::new(vec![0.1, -0.2, 0.3, 0.4], 8000).unwrap();
        let r = resample(&w, 8000).unwrap();
        assert_eq!(r, w);
    }

    #[test]
    fn resample_constant_stays_constant() {
        let w = Waveform::new(vec![0.25; 1000], 8000).unwrap();
        for target in [4000, 12000, 44100] {
            let r = resample(&w, target).unwrap();
            assert_eq!(r.len(), (1000.0 * target as f64 / 8000.0).round() as usize);
            for &s in r.samples() {
                assert!((s - 0.25).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn resample_sine_close_to_analytic() {
        // 1 Hz sine sampled at 8 kHz, downsampled to 4 kHz.
        let rate = 8000u32;
        let n = rate as usize; // one second
        let samples: Vec<f32> = (0..n)
            .map(|i| {
                let t = i as f64 / rate as f64;
                (0.9 * (2.0 * core::f64::consts::PI * t).sin()) as f32
            })
            .collect();
        let w = Waveform::new(samples, rate).unwrap();
        let r = resample(&w, 4000).unwrap();
        let mut err = 0.0f64;
        for (i, &s) in r.samples().iter().enumerate() {
            let t = i as f64 / 4000.0;
            let expect = 0.9 * (2.0 * core::f64::consts::PI * t).sin();
            err += (s as f64 - expect) * (s as f64 - expect);
        }
        let rms = (err / r.len() as f64).sqrt();
        assert!(rms < 1e-3, "rms error {rms}");
    }

    #[test]
    fn resample_preserves_duration_within_one_sample() {
        let w = Waveform::new(vec![0.0; 12345], 8000).unwrap();
        let r = resample(&w, 3000).unwrap();
        assert!((r.duration_s() - w.duration_s()).abs() <= 1.0 / 3000.0);
    }

    #[test]
    fn extract_counts_and_offsets() {
        let rate = 100u32;
        let n = 20 * rate as usize;
        let samples: Vec<f32> = (0..n).map(|i| (i % 100) as f32 / 100.0).collect();
        let w = Waveform::new(samples, rate).unwrap();
        let out = extract_frames(&w, &meta(20.0), 5.0, 1.0);
        assert_eq!(out.frames.len(), 16);
        for (i, frame) in out.frames.iter().enumerate() {
            assert_eq!(frame.samples.len(), 500);
            assert!((frame.source_offset_s - i as f64).abs() < 1e-12);
            assert_eq!(frame.subject_id, "s1");
            assert_eq!(frame.label, Diagnosis::Copd);
        }
    }

    #[test]
    fn adjacent_frames_shift_by_stride() {
        let rate = 50u32;
        let n = 10 * rate as usize;
        let samples: Vec<f32> = (0..n).map(|i| i as f32 / n as f32).collect();
        let w = Waveform::new(samples, rate).unwrap();
        let out = extract_frames(&w, &meta(10.0), 2.0, 0.5);
        let stride_n = 25usize;
        for pair in out.frames.windows(2) {
            let a = &pair[0].samples;
            let b = &pair[1].samples;
            assert_eq!(&a[stride_n..], &b[..a.len() - stride_n]);
        }
    }

    #[test]
    fn short_recording_yields_empty_with_warning() {
        let w = Waveform::new(vec![0.0; 100], 100).unwrap();
        let out = extract_frames(&w, &meta(1.0), 5.0, 1.0);
        assert!(out.frames.is_empty());
        assert!(out.window_exceeds_duration);
    }

    #[test]
    fn normalize_peak_scales_to_unit() {
        let mut x = vec![0.5, -0.25, 0.1];
        normalize_peak(&mut x);
        assert_eq!(x, vec![1.0, -0.5, 0.2]);
        let mut zeros = vec![0.0f32; 4];
        normalize_peak(&mut zeros);
        assert!(zeros.iter().all(|&v| v == 0.0));
    }
}
