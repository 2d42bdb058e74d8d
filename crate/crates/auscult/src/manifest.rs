//! The dataset manifest format and the respiratory-cycle annotation format.
//!
//! A manifest is UTF-8 delimiter-separated text (tab or comma, detected from
//! the header row) with a header line and the columns
//!
//! ```text
//! subject_id  diagnosis  device  age_years  sex  audio_path  annotation_path  [duration_s]
//! ```
//!
//! `annotation_path` may be empty. `duration_s` is optional; when the column
//! is missing or a cell is empty, the duration is read from the referenced
//! audio file's header. Relative paths resolve against the manifest's
//! directory.
//!
//! Annotation files are whitespace-separated rows `start_s end_s crackles
//! wheezes` with 0/1 flags, matching the public database's annotation layout.

use std::fs;
use std::path::{Path, PathBuf};

use auscult_core::dataset::{
    CycleAnnotation, Device, Diagnosis, RecordingMeta, Sex,
};
use auscult_core::model::{encode_demographics, DemographicVector};

use crate::error::{AppError, Result};
use crate::wav::wav_duration_s;

const COLUMNS: [&str; 7] = [
    "subject_id",
    "diagnosis",
    "device",
    "age_years",
    "sex",
    "audio_path",
    "annotation_path",
];

/// One manifest row: the validated recording plus the raw paths needed to
/// rewrite the row when filtering.
#[derive(Clone, Debug)]
pub struct ManifestEntry {
    pub meta: RecordingMeta,
    pub raw_audio_path: String,
    pub raw_annotation_path: String,
}

/// A loaded manifest.
#[derive(Clone, Debug, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn recordings(&self) -> Vec<RecordingMeta> {
        self.entries.iter().map(|e| e.meta.clone()).collect()
    }
}

fn detect_delimiter(header: &str) -> char {
    if header.contains('\t') {
        '\t'
    } else {
        ','
    }
}

/// Parses annotation rows `start_s end_s crackles wheezes`.
///
/// Rejects non-numeric fields, inverted intervals, and rows whose start
/// decreases relative to the previous row.
pub fn load_cycles(path: impl AsRef<Path>) -> Result<Vec<CycleAnnotation>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let mut cycles = Vec::new();
    let mut prev_start = f64::NEG_INFINITY;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(AppError::parse(
                path,
                line_no,
                format!("expected 4 fields (start end crackles wheezes), got {}", fields.len()),
            ));
        }
        let num = |i: usize, what: &str| -> Result<f64> {
            fields[i].parse::<f64>().map_err(|_| {
                AppError::parse(path, line_no, format!("non-numeric {what}: '{}'", fields[i]))
            })
        };
        let start_s = num(0, "start_s")?;
        let end_s = num(1, "end_s")?;
        let flag = |i: usize, what: &str| -> Result<bool> {
            match fields[i] {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(AppError::parse(
                    path,
                    line_no,
                    format!("{what} flag must be 0 or 1, got '{other}'"),
                )),
            }
        };
        let crackles = flag(2, "crackles")?;
        let wheezes = flag(3, "wheezes")?;
        if start_s < prev_start {
            return Err(AppError::parse(
                path,
                line_no,
                format!("cycle start {start_s} is before the previous cycle's start {prev_start}"),
            ));
        }
        prev_start = start_s;
        let cycle = CycleAnnotation::new(start_s, end_s, crackles, wheezes)
            .map_err(|e| AppError::parse(path, line_no, format!("{e}")))?;
        cycles.push(cycle);
    }
    Ok(cycles)
}

fn resolve(base: &Path, raw: &str) -> PathBuf {
    let p = Path::new(raw);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Loads and validates a manifest. Every referenced audio file must exist;
/// durations missing from the manifest are read from the audio headers.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(AppError::parse(path, 1, "empty file, expected a header row"));
    };
    let delim = detect_delimiter(header);
    let cols: Vec<&str> = header.split(delim).map(str::trim).collect();
    if cols.len() < COLUMNS.len() || cols[..COLUMNS.len()] != COLUMNS {
        return Err(AppError::parse(
            path,
            1,
            format!("header must start with {COLUMNS:?}, got {cols:?}"),
        ));
    }
    let has_duration = cols.len() > COLUMNS.len() && cols[COLUMNS.len()] == "duration_s";
    if cols.len() > COLUMNS.len() && !has_duration {
        return Err(AppError::parse(
            path,
            1,
            format!("unknown extra column '{}'", cols[COLUMNS.len()]),
        ));
    }

    let mut entries = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(delim).map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(AppError::parse(
                path,
                line_no,
                format!("expected {} fields, got {}", cols.len(), fields.len()),
            ));
        }
        let field_err = |field: &str, detail: String| AppError::parse(
            path,
            line_no,
            format!("field '{field}': {detail}"),
        );
        let diagnosis = Diagnosis::from_token(fields[1])
            .ok_or_else(|| field_err("diagnosis", format!("unknown class token '{}'", fields[1])))?;
        let device = Device::from_token(fields[2])
            .ok_or_else(|| field_err("device", format!("unknown device token '{}'", fields[2])))?;
        let age_years: f64 = fields[3]
            .parse()
            .map_err(|_| field_err("age_years", format!("not a number: '{}'", fields[3])))?;
        let sex = Sex::from_token(fields[4])
            .ok_or_else(|| field_err("sex", format!("expected M, F, or Unknown, got '{}'", fields[4])))?;
        let raw_audio_path = fields[5].to_string();
        if raw_audio_path.is_empty() {
            return Err(field_err("audio_path", "must not be empty".into()));
        }
        let audio_path = resolve(&base, &raw_audio_path);
        if !audio_path.is_file() {
            return Err(field_err(
                "audio_path",
                format!("missing audio file '{}'", audio_path.display()),
            ));
        }
        let raw_annotation_path = fields[6].to_string();
        let cycles = if raw_annotation_path.is_empty() {
            Vec::new()
        } else {
            load_cycles(resolve(&base, &raw_annotation_path))?
        };
        let duration_s = if has_duration && !fields[7].is_empty() {
            fields[7]
                .parse()
                .map_err(|_| field_err("duration_s", format!("not a number: '{}'", fields[7])))?
        } else {
            wav_duration_s(&audio_path)?
        };
        let meta = RecordingMeta::new(
            fields[0].to_string(),
            diagnosis,
            device,
            age_years,
            sex,
            audio_path.to_string_lossy().into_owned(),
            duration_s,
            cycles,
        )
        .map_err(|e| AppError::parse(path, line_no, format!("{e}")))?;
        entries.push(ManifestEntry {
            meta,
            raw_audio_path,
            raw_annotation_path,
        });
    }
    Ok(Manifest { entries })
}

/// Writes a manifest (tab-separated, with the duration column) for the given
/// entries. Raw paths are written as loaded, so a filtered manifest stays
/// valid relative to the same directory.
pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(&COLUMNS.join("\t"));
    out.push_str("\tduration_s\n");
    for e in entries {
        let m = &e.meta;
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            m.subject_id,
            m.diagnosis.token(),
            m.device.token(),
            m.age_years,
            m.sex.token(),
            e.raw_audio_path,
            e.raw_annotation_path,
            m.duration_s,
        ));
    }
    fs::write(path, out).map_err(|e| AppError::io(path, e))
}

/// Demographic vectors per subject, drawn from the manifest's age and sex
/// columns.
pub fn demographics_from_manifest(
    manifest: &Manifest,
    include_gender: bool,
) -> Result<std::collections::BTreeMap<String, DemographicVector>> {
    let mut out = std::collections::BTreeMap::new();
    for e in &manifest.entries {
        let demo = encode_demographics(Some(e.meta.age_years), e.meta.sex, include_gender)?;
        out.insert(e.meta.subject_id.clone(), demo);
    }
    Ok(out)
}

/// Loads a demographics override file: tab- or comma-separated rows
/// `subject_id  age_years  sex`, header row required. Age may be empty for
/// unknown. This is the entry point for externally estimated demographics.
pub fn load_demographics(
    path: impl AsRef<Path>,
    include_gender: bool,
) -> Result<std::collections::BTreeMap<String, DemographicVector>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(AppError::parse(path, 1, "empty file, expected a header row"));
    };
    let delim = detect_delimiter(header);
    let cols: Vec<&str> = header.split(delim).map(str::trim).collect();
    if cols != ["subject_id", "age_years", "sex"] {
        return Err(AppError::parse(
            path,
            1,
            format!("header must be subject_id/age_years/sex, got {cols:?}"),
        ));
    }
    let mut out = std::collections::BTreeMap::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(delim).map(str::trim).collect();
        if fields.len() != 3 {
            return Err(AppError::parse(
                path,
                line_no,
                format!("expected 3 fields, got {}", fields.len()),
            ));
        }
        let age = if fields[1].is_empty() {
            None
        } else {
            Some(fields[1].parse::<f64>().map_err(|_| {
                AppError::parse(path, line_no, format!("bad age '{}'", fields[1]))
            })?)
        };
        let sex = Sex::from_token(fields[2]).ok_or_else(|| {
            AppError::parse(path, line_no, format!("bad sex '{}'", fields[2]))
        })?;
        let demo = encode_demographics(age, sex, include_gender)?;
        out.insert(fields[0].to_string(), demo);
    }
    Ok(out)
}
