//! Synthetic fixtures: a generated database that reproduces the selected
//! dataset's per-class subject counts, durations, and respiratory-cycle
//! totals, plus small synthetic audio tasks for desk-scale learning checks.
//!
//! Nothing here ships data; fixtures are generated deterministically into a
//! caller-supplied directory.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use auscult_core::dataset::{CycleAnnotation, Device, Diagnosis, RecordingMeta, Sex, SplitSpec};
use auscult_core::train::LabeledExample;

use crate::error::{AppError, Result};
use crate::manifest::{write_manifest, ManifestEntry};
use crate::wav::write_wav_mono16;

/// Selected-dataset layout: per retained class, `(subjects, duration_s,
/// cycles)` for the train side. All recordings are 20 s.
pub const TRAIN_LAYOUT: [(Diagnosis, usize, f64, usize); 5] = [
    (Diagnosis::Urti, 12, 380.0, 207),
    (Diagnosis::Healthy, 24, 560.0, 257),
    (Diagnosis::Copd, 6, 580.0, 406),
    (Diagnosis::Bronchiectasis, 5, 260.0, 88),
    (Diagnosis::Bronchiolitis, 5, 220.0, 141),
];

/// Test-side layout, same columns as [`TRAIN_LAYOUT`].
pub const TEST_LAYOUT: [(Diagnosis, usize, f64, usize); 5] = [
    (Diagnosis::Urti, 2, 80.0, 26),
    (Diagnosis::Healthy, 4, 140.0, 48),
    (Diagnosis::Copd, 2, 140.0, 119),
    (Diagnosis::Bronchiectasis, 2, 60.0, 17),
    (Diagnosis::Bronchiolitis, 1, 40.0, 16),
];

const RECORDING_S: f64 = 20.0;
const AGES: [f64; 10] = [4.0, 12.0, 25.0, 33.0, 47.0, 55.0, 61.0, 72.0, 86.0, 93.0];

/// Paths of a generated fixture database.
#[derive(Clone, Debug)]
pub struct Table1Fixture {
    pub dir: PathBuf,
    /// Selected train rows only.
    pub train_manifest: PathBuf,
    /// Selected test rows only.
    pub test_manifest: PathBuf,
    /// Selected train + test rows.
    pub all_manifest: PathBuf,
    /// Everything, including other-device and dropped-class rows.
    pub database_manifest: PathBuf,
    /// Subject-exclusive split matching the train/test manifests.
    pub split: PathBuf,
}

fn class_tone_hz(diagnosis: Diagnosis, sample_rate_hz: u32) -> f64 {
    // Distinct, comfortably below Nyquist at any rate the fixture uses.
    let base = sample_rate_hz as f64 / 50.0;
    base * (1.0 + diagnosis.index() as f64 * 0.35)
}

fn synth_recording(diagnosis: Diagnosis, sample_rate_hz: u32, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let n = (RECORDING_S * sample_rate_hz as f64).round() as usize;
    let freq = class_tone_hz(diagnosis, sample_rate_hz);
    let phase: f64 = rng.random_range(0.0..TAU);
    (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate_hz as f64;
            let tone = 0.55 * (TAU * freq * t + phase).sin();
            let noise: f64 = rng.random_range(-0.2..0.2);
            (tone + noise) as f32
        })
        .collect()
}

fn cycles_for(total: usize, recordings: usize, rec_idx: usize) -> usize {
    // Spread `total` cycles over `recordings`, front-loading the remainder.
    let base = total / recordings;
    let extra = total % recordings;
    base + usize::from(rec_idx < extra)
}

struct RowSpec {
    subject_id: String,
    diagnosis: Diagnosis,
    device: Device,
    age: f64,
    sex: Sex,
    n_cycles: usize,
}

fn write_rows(
    dir: &Path,
    rows: &[RowSpec],
    sample_rate_hz: u32,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ManifestEntry>> {
    let audio_dir = dir.join("audio");
    let ann_dir = dir.join("annotations");
    fs::create_dir_all(&audio_dir).map_err(|e| AppError::io(&audio_dir, e))?;
    fs::create_dir_all(&ann_dir).map_err(|e| AppError::io(&ann_dir, e))?;
    let mut entries = Vec::with_capacity(rows.len());
    let mut rec_counter: std::collections::BTreeMap<String, usize> = Default::default();
    for row in rows {
        let k = rec_counter.entry(row.subject_id.clone()).or_insert(0);
        let stem = format!("{}_{:02}", row.subject_id, *k);
        *k += 1;
        let wav_rel = format!("audio/{stem}.wav");
        write_wav_mono16(
            dir.join(&wav_rel),
            &synth_recording(row.diagnosis, sample_rate_hz, rng),
            sample_rate_hz,
        )?;
        let mut cycles = Vec::with_capacity(row.n_cycles);
        let mut ann_text = String::new();
        for c in 0..row.n_cycles {
            let w = RECORDING_S / row.n_cycles as f64;
            let (start, end) = (c as f64 * w, (c + 1) as f64 * w);
            let (crackles, wheezes) = (c % 2 == 0, c % 3 == 0);
            ann_text.push_str(&format!(
                "{start:.3} {end:.3} {} {}\n",
                u8::from(crackles),
                u8::from(wheezes)
            ));
            cycles.push(CycleAnnotation::new(start, end, crackles, wheezes).expect("valid cycle"));
        }
        let ann_rel = if row.n_cycles > 0 {
            let rel = format!("annotations/{stem}.txt");
            let p = dir.join(&rel);
            fs::write(&p, ann_text).map_err(|e| AppError::io(&p, e))?;
            rel
        } else {
            String::new()
        };
        let meta = RecordingMeta::new(
            row.subject_id.clone(),
            row.diagnosis,
            row.device,
            row.age,
            row.sex,
            dir.join(&wav_rel).to_string_lossy().into_owned(),
            RECORDING_S,
            cycles,
        )
        .expect("fixture rows satisfy the invariants");
        entries.push(ManifestEntry {
            meta,
            raw_audio_path: wav_rel,
            raw_annotation_path: ann_rel,
        });
    }
    Ok(entries)
}

fn layout_rows(layout: &[(Diagnosis, usize, f64, usize)], prefix: &str) -> Vec<RowSpec> {
    let mut rows = Vec::new();
    for &(diagnosis, subjects, duration_s, cycles) in layout {
        let recordings = (duration_s / RECORDING_S).round() as usize;
        for rec in 0..recordings {
            // Round-robin assignment gives every subject at least one
            // recording (each class has more recordings than subjects).
            let subj_idx = rec % subjects;
            rows.push(RowSpec {
                subject_id: format!("{prefix}_{}_{subj_idx:02}", diagnosis.token()),
                diagnosis,
                device: Device::Meditron,
                age: AGES[(subj_idx + diagnosis.index()) % AGES.len()],
                sex: if subj_idx % 2 == 0 { Sex::M } else { Sex::F },
                n_cycles: cycles_for(cycles, recordings, rec),
            });
        }
    }
    rows
}

fn distractor_rows() -> Vec<RowSpec> {
    let spec = [
        ("noise_00", Diagnosis::Asthma, Device::Meditron, 31.0),
        ("noise_01", Diagnosis::Copd, Device::Microphone, 68.0),
        ("noise_02", Diagnosis::Lrti, Device::LittmannClassic, 44.0),
        ("noise_03", Diagnosis::Pneumonia, Device::Littmann3200, 57.0),
        ("noise_04", Diagnosis::Healthy, Device::Microphone, 23.0),
    ];
    spec.iter()
        .map(|&(id, diagnosis, device, age)| RowSpec {
            subject_id: id.to_string(),
            diagnosis,
            device,
            age,
            sex: Sex::Unknown,
            n_cycles: 4,
        })
        .collect()
}

/// Generates the fixture database into `dir`: WAVs, annotation files, the
/// selected train/test/all manifests, a full database manifest with
/// distractor rows, and the matching subject-exclusive split.
pub fn table1_fixture(dir: impl AsRef<Path>, sample_rate_hz: u32) -> Result<Table1Fixture> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1ec7);

    let train_rows = layout_rows(&TRAIN_LAYOUT, "tr");
    let test_rows = layout_rows(&TEST_LAYOUT, "te");
    let noise_rows = distractor_rows();

    let train_entries = write_rows(dir, &train_rows, sample_rate_hz, &mut rng)?;
    let test_entries = write_rows(dir, &test_rows, sample_rate_hz, &mut rng)?;
    let noise_entries = write_rows(dir, &noise_rows, sample_rate_hz, &mut rng)?;

    let train_manifest = dir.join("train.tsv");
    let test_manifest = dir.join("test.tsv");
    let all_manifest = dir.join("all.tsv");
    let database_manifest = dir.join("database.tsv");
    write_manifest(&train_manifest, &train_entries)?;
    write_manifest(&test_manifest, &test_entries)?;
    let mut all = train_entries.clone();
    all.extend(test_entries.iter().cloned());
    write_manifest(&all_manifest, &all)?;
    let mut database = all.clone();
    database.extend(noise_entries);
    write_manifest(&database_manifest, &database)?;

    let split_spec = SplitSpec {
        train_subjects: train_entries
            .iter()
            .map(|e| e.meta.subject_id.clone())
            .collect(),
        test_subjects: test_entries
            .iter()
            .map(|e| e.meta.subject_id.clone())
            .collect(),
        classes: Diagnosis::RETAINED.to_vec(),
    };
    let split = dir.join("split.json");
    let json = serde_json::to_string_pretty(&split_spec)
        .map_err(|e| AppError::format(&split, format!("{e}")))?;
    fs::write(&split, json).map_err(|e| AppError::io(&split, e))?;

    Ok(Table1Fixture {
        dir: dir.to_path_buf(),
        train_manifest,
        test_manifest,
        all_manifest,
        database_manifest,
        split,
    })
}

/// A generated two-class audio task.
pub struct SyntheticTask {
    pub train: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
    pub class_names: Vec<String>,
}

fn tone(len: usize, sample_rate_hz: u32, freq: f64, phase: f64) -> Vec<f32> {
    (0..len)
        .map(|i| {
            let t = i as f64 / sample_rate_hz as f64;
            (0.5 * (TAU * freq * t + phase).sin()) as f32
        })
        .collect()
}

fn broadband(len: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    // Uniform noise with the same RMS as the 0.5-amplitude tone.
    (0..len).map(|_| rng.random_range(-0.61f32..0.61)).collect()
}

/// Band-limited tone vs. broadband noise, balanced, one group per example.
pub fn tone_vs_noise_task(
    n_train: usize,
    n_test: usize,
    sample_rate_hz: u32,
    window_s: f64,
    seed: u64,
) -> SyntheticTask {
    let len = (window_s * sample_rate_hz as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut make = |n: usize, tag: &str| {
        (0..n)
            .map(|i| {
                let label = i % 2;
                let input = if label == 0 {
                    let freq = rng.random_range(
                        sample_rate_hz as f64 * 0.05..sample_rate_hz as f64 * 0.2,
                    );
                    let phase = rng.random_range(0.0..TAU);
                    tone(len, sample_rate_hz, freq, phase)
                } else {
                    broadband(len, &mut rng)
                };
                LabeledExample {
                    input,
                    aux: None,
                    label,
                    group: format!("{tag}{i}"),
                }
            })
            .collect::<Vec<_>>()
    };
    SyntheticTask {
        train: make(n_train, "train_ex"),
        test: make(n_test, "test_ex"),
        class_names: vec!["tone".into(), "noise".into()],
    }
}

/// A task whose label depends jointly on the audio pattern and the age-group
/// vector: the target class is broadband noise from an older age group.
/// Tone recordings are always the other class, so audio alone can reach at
/// most 75% accuracy on the balanced combos while fusion can separate
/// everything.
pub fn joint_audio_age_task(
    n_train: usize,
    n_test: usize,
    sample_rate_hz: u32,
    window_s: f64,
    seed: u64,
) -> SyntheticTask {
    let len = (window_s * sample_rate_hz as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut make = |n: usize, tag: &str| {
        (0..n)
            .map(|i| {
                let noisy = i % 2 == 1;
                let old = (i / 2) % 2 == 1;
                let input = if noisy {
                    broadband(len, &mut rng)
                } else {
                    let freq = rng.random_range(
                        sample_rate_hz as f64 * 0.05..sample_rate_hz as f64 * 0.2,
                    );
                    let phase = rng.random_range(0.0..TAU);
                    tone(len, sample_rate_hz, freq, phase)
                };
                let group_idx = if old {
                    rng.random_range(5..10usize)
                } else {
                    rng.random_range(0..5usize)
                };
                let mut age_onehot = vec![0.0f32; 10];
                age_onehot[group_idx] = 1.0;
                LabeledExample {
                    input,
                    aux: Some(age_onehot),
                    label: usize::from(noisy && old),
                    group: format!("{tag}{i}"),
                }
            })
            .collect::<Vec<_>>()
    };
    SyntheticTask {
        train: make(n_train, "train_ex"),
        test: make(n_test, "test_ex"),
        class_names: vec!["other".into(), "target".into()],
    }
}

/// Drops the auxiliary vectors, turning a fusion task into an audio-only one.
pub fn strip_aux(examples: &[LabeledExample]) -> Vec<LabeledExample> {
    examples
        .iter()
        .map(|e| LabeledExample {
            aux: None,
            ..e.clone()
        })
        .collect()
}
