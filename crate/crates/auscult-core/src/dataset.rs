//! Recording metadata, database statistics, device/class filtering, and
//! subject-exclusive train/test splitting.
//!
//! A subject is counted once per class in subject-level tallies; every
//! recording contributes to duration and cycle totals. Splits never place
//! the same subject on both sides.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Diagnosis classes annotated in the source database. The first five are
/// the retained classes of the selected subset, in report order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Diagnosis {
    Urti,
    Healthy,
    Copd,
    Bronchiectasis,
    Bronchiolitis,
    Asthma,
    Lrti,
    Pneumonia,
}

impl Diagnosis {
    pub const ALL: [Diagnosis; 8] = [
        Diagnosis::Urti,
        Diagnosis::Healthy,
        Diagnosis::Copd,
        Diagnosis::Bronchiectasis,
        Diagnosis::Bronchiolitis,
        Diagnosis::Asthma,
        Diagnosis::Lrti,
        Diagnosis::Pneumonia,
    ];

    /// The five classes kept after dropping the ones with little or no
    /// coverage on the retained device.
    pub const RETAINED: [Diagnosis; 5] = [
        Diagnosis::Urti,
        Diagnosis::Healthy,
        Diagnosis::Copd,
        Diagnosis::Bronchiectasis,
        Diagnosis::Bronchiolitis,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Diagnosis::Urti => "URTI",
            Diagnosis::Healthy => "Healthy",
            Diagnosis::Copd => "COPD",
            Diagnosis::Bronchiectasis => "Bronchiectasis",
            Diagnosis::Bronchiolitis => "Bronchiolitis",
            Diagnosis::Asthma => "Asthma",
            Diagnosis::Lrti => "LRTI",
            Diagnosis::Pneumonia => "Pneumonia",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|d| d.token() == token)
    }

    /// Position in [`Self::ALL`].
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&d| d == self).expect("listed")
    }
}

/// Recording equipment used in the source database.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Device {
    Microphone,
    LittmannClassic,
    Littmann3200,
    Meditron,
}

impl Device {
    pub const ALL: [Device; 4] = [
        Device::Microphone,
        Device::LittmannClassic,
        Device::Littmann3200,
        Device::Meditron,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Device::Microphone => "Microphone",
            Device::LittmannClassic => "LittmannClassic",
            Device::Littmann3200 => "Littmann3200",
            Device::Meditron => "Meditron",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|d| d.token() == token)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sex {
    M,
    F,
    Unknown,
}

impl Sex {
    pub fn token(self) -> &'static str {
        match self {
            Sex::M => "M",
            Sex::F => "F",
            Sex::Unknown => "Unknown",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        match token {
            "M" => Some(Sex::M),
            "F" => Some(Sex::F),
            "Unknown" => Some(Sex::Unknown),
            _ => None,
        }
    }
}

/// One annotated respiratory cycle within a recording.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleAnnotation {
    pub start_s: f64,
    pub end_s: f64,
    pub crackles: bool,
    pub wheezes: bool,
}

impl CycleAnnotation {
    pub fn new(
        start_s: f64,
        end_s: f64,
        crackles: bool,
        wheezes: bool,
    ) -> Result<Self, DatasetError> {
        if !(start_s < end_s) {
            return Err(DatasetError::InvertedInterval { start_s, end_s });
        }
        Ok(Self {
            start_s,
            end_s,
            crackles,
            wheezes,
        })
    }
}

/// One recording of one subject, with its annotations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub subject_id: String,
    pub diagnosis: Diagnosis,
    pub device: Device,
    pub age_years: f64,
    pub sex: Sex,
    /// Path of the referenced audio file, as written in the manifest.
    pub audio_path: String,
    pub duration_s: f64,
    pub cycles: Vec<CycleAnnotation>,
}

impl RecordingMeta {
    /// Validates the per-recording invariants: positive duration, cycles
    /// inside `[0, duration_s]`, cycle start before end.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        subject_id: String,
        diagnosis: Diagnosis,
        device: Device,
        age_years: f64,
        sex: Sex,
        audio_path: String,
        duration_s: f64,
        cycles: Vec<CycleAnnotation>,
    ) -> Result<Self, DatasetError> {
        if !(duration_s > 0.0) || !duration_s.is_finite() {
            return Err(DatasetError::NonPositiveDuration { duration_s });
        }
        if !(age_years >= 0.0) || !age_years.is_finite() {
            return Err(DatasetError::NegativeAge { age_years });
        }
        for cycle in &cycles {
            if !(cycle.start_s < cycle.end_s) {
                return Err(DatasetError::InvertedInterval {
                    start_s: cycle.start_s,
                    end_s: cycle.end_s,
                });
            }
            if cycle.start_s < 0.0 || cycle.end_s > duration_s + 1e-9 {
                return Err(DatasetError::CycleOutOfRange {
                    start_s: cycle.start_s,
                    end_s: cycle.end_s,
                    duration_s,
                });
            }
        }
        Ok(Self {
            subject_id,
            diagnosis,
            device,
            age_years,
            sex,
            audio_path,
            duration_s,
            cycles,
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error("recording duration must be positive, got {duration_s}")]
    NonPositiveDuration { duration_s: f64 },
    #[error("age must be non-negative, got {age_years}")]
    NegativeAge { age_years: f64 },
    #[error("cycle interval inverted: start {start_s} >= end {end_s}")]
    InvertedInterval { start_s: f64, end_s: f64 },
    #[error("cycle [{start_s}, {end_s}] outside recording of {duration_s} s")]
    CycleOutOfRange {
        start_s: f64,
        end_s: f64,
        duration_s: f64,
    },
    #[error("no recordings to analyse")]
    EmptyInput,
    #[error("selection produced no recordings (device {device}, {dropped} dropped classes)")]
    EmptySelection { device: String, dropped: usize },
    #[error("subject '{subject_id}' appears with diagnoses {first} and {second}")]
    ConflictingDiagnosis {
        subject_id: String,
        first: String,
        second: String,
    },
    #[error("class {class} has a single subject; a subject-exclusive split needs at least 2")]
    UnsatisfiableSplit { class: String },
    #[error("test fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("{0}")]
    Invalid(String),
}

/// Number of age groups in the statistics and in the demographic encoding.
pub const AGE_GROUPS: usize = 10;

/// Options for [`compute_stats`].
#[derive(Clone, Debug)]
pub struct StatsOptions {
    /// Width of one age group in years; the last group is open-ended.
    pub age_group_width_years: f64,
    /// Waives the non-empty precondition, yielding all-zero statistics.
    pub allow_empty: bool,
}

impl Default for StatsOptions {
    fn default() -> Self {
        Self {
            age_group_width_years: 10.0,
            allow_empty: false,
        }
    }
}

/// Subject-level class/age/device breakdowns plus recording-level duration
/// and cycle totals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    /// Distinct subjects per class.
    pub class_counts: BTreeMap<Diagnosis, usize>,
    /// Distinct subjects per class and age group (rows sum to `class_counts`).
    pub class_by_age_group: BTreeMap<Diagnosis, [usize; AGE_GROUPS]>,
    /// Distinct subjects per class and recording device.
    pub class_by_device: BTreeMap<Diagnosis, BTreeMap<Device, usize>>,
    /// Total recorded seconds per class.
    pub class_durations_s: BTreeMap<Diagnosis, f64>,
    /// Total annotated respiratory cycles per class.
    pub class_cycle_counts: BTreeMap<Diagnosis, usize>,
    pub total_subjects: usize,
    pub total_recordings: usize,
}

impl DatasetStats {
    pub fn total_duration_s(&self) -> f64 {
        self.class_durations_s.values().sum()
    }
}

/// Computes [`DatasetStats`]. Age group index is `floor(age / width)` clamped
/// to the last of the [`AGE_GROUPS`] groups.
pub fn compute_stats(
    recordings: &[RecordingMeta],
    opts: &StatsOptions,
) -> Result<DatasetStats, DatasetError> {
    if !(opts.age_group_width_years > 0.0) {
        return Err(DatasetError::Invalid(format!(
            "age group width must be positive, got {}",
            opts.age_group_width_years
        )));
    }
    if recordings.is_empty() && !opts.allow_empty {
        return Err(DatasetError::EmptyInput);
    }

    let mut subject_diag: BTreeMap<&str, Diagnosis> = BTreeMap::new();
    let mut subject_age: BTreeMap<&str, f64> = BTreeMap::new();
    let mut subject_devices: BTreeSet<(&str, Device)> = BTreeSet::new();
    let mut class_durations_s: BTreeMap<Diagnosis, f64> = BTreeMap::new();
    let mut class_cycle_counts: BTreeMap<Diagnosis, usize> = BTreeMap::new();

    for rec in recordings {
        let id = rec.subject_id.as_str();
        match subject_diag.get(id) {
            Some(&prev) if prev != rec.diagnosis => {
                return Err(DatasetError::ConflictingDiagnosis {
                    subject_id: rec.subject_id.clone(),
                    first: prev.token().to_string(),
                    second: rec.diagnosis.token().to_string(),
                });
            }
            Some(_) => {}
            None => {
                subject_diag.insert(id, rec.diagnosis);
                subject_age.insert(id, rec.age_years);
            }
        }
        subject_devices.insert((id, rec.device));
        *class_durations_s.entry(rec.diagnosis).or_insert(0.0) += rec.duration_s;
        *class_cycle_counts.entry(rec.diagnosis).or_insert(0) += rec.cycles.len();
    }

    let mut class_counts: BTreeMap<Diagnosis, usize> = BTreeMap::new();
    let mut class_by_age_group: BTreeMap<Diagnosis, [usize; AGE_GROUPS]> = BTreeMap::new();
    for (id, &diag) in &subject_diag {
        *class_counts.entry(diag).or_insert(0) += 1;
        let age = subject_age[id];
        let group = ((age / opts.age_group_width_years).floor() as usize).min(AGE_GROUPS - 1);
        class_by_age_group.entry(diag).or_insert([0; AGE_GROUPS])[group] += 1;
    }

    let mut class_by_device: BTreeMap<Diagnosis, BTreeMap<Device, usize>> = BTreeMap::new();
    for (id, device) in &subject_devices {
        let diag = subject_diag[id];
        *class_by_device
            .entry(diag)
            .or_default()
            .entry(*device)
            .or_insert(0) += 1;
    }

    Ok(DatasetStats {
        class_counts,
        class_by_age_group,
        class_by_device,
        class_durations_s,
        class_cycle_counts,
        total_subjects: subject_diag.len(),
        total_recordings: recordings.len(),
    })
}

/// Keeps recordings from `keep_device` whose diagnosis is not in
/// `drop_classes`, preserving input order.
pub fn select_subset(
    recordings: &[RecordingMeta],
    keep_device: Device,
    drop_classes: &BTreeSet<Diagnosis>,
) -> Result<Vec<RecordingMeta>, DatasetError> {
    let selected: Vec<RecordingMeta> = recordings
        .iter()
        .filter(|r| r.device == keep_device && !drop_classes.contains(&r.diagnosis))
        .cloned()
        .collect();
    if selected.is_empty() {
        return Err(DatasetError::EmptySelection {
            device: keep_device.token().to_string(),
            dropped: drop_classes.len(),
        });
    }
    Ok(selected)
}

/// A subject-exclusive train/test assignment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_subjects: BTreeSet<String>,
    pub test_subjects: BTreeSet<String>,
    /// Classes present in the split, in [`Diagnosis::ALL`] order.
    pub classes: Vec<Diagnosis>,
}

impl SplitSpec {
    pub fn is_train(&self, subject_id: &str) -> bool {
        self.train_subjects.contains(subject_id)
    }

    pub fn is_test(&self, subject_id: &str) -> bool {
        self.test_subjects.contains(subject_id)
    }
}

/// Stratified-by-class greedy subject assignment with a seeded shuffle.
///
/// Every class sends at least one subject to each side; the test share per
/// class approximates `test_fraction`. Deterministic for a fixed seed.
pub fn split_subjects(
    recordings: &[RecordingMeta],
    test_fraction: f64,
    seed: u64,
) -> Result<SplitSpec, DatasetError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DatasetError::InvalidFraction(test_fraction));
    }
    if recordings.is_empty() {
        return Err(DatasetError::EmptyInput);
    }

    // Subjects per class, deduplicated, in first-seen order.
    let mut per_class: BTreeMap<Diagnosis, Vec<String>> = BTreeMap::new();
    let mut seen: BTreeMap<String, Diagnosis> = BTreeMap::new();
    for rec in recordings {
        match seen.get(&rec.subject_id) {
            Some(&prev) if prev != rec.diagnosis => {
                return Err(DatasetError::ConflictingDiagnosis {
                    subject_id: rec.subject_id.clone(),
                    first: prev.token().to_string(),
                    second: rec.diagnosis.token().to_string(),
                });
            }
            Some(_) => {}
            None => {
                seen.insert(rec.subject_id.clone(), rec.diagnosis);
                per_class
                    .entry(rec.diagnosis)
                    .or_default()
                    .push(rec.subject_id.clone());
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_subjects = BTreeSet::new();
    let mut test_subjects = BTreeSet::new();
    let mut classes = Vec::new();
    // Iterate classes in canonical order so the seed alone fixes the result.
    for diag in Diagnosis::ALL {
        let Some(subjects) = per_class.get(&diag) else {
            continue;
        };
        classes.push(diag);
        if subjects.len() < 2 {
            return Err(DatasetError::UnsatisfiableSplit {
                class: diag.token().to_string(),
            });
        }
        let mut shuffled = subjects.clone();
        shuffled.shuffle(&mut rng);
        let n = shuffled.len();
        let n_test = (((n as f64) * test_fraction).round() as usize).clamp(1, n - 1);
        for (i, subject) in shuffled.into_iter().enumerate() {
            if i < n_test {
                test_subjects.insert(subject);
            } else {
                train_subjects.insert(subject);
            }
        }
    }

    Ok(SplitSpec {
        train_subjects,
        test_subjects,
        classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    pub(crate) fn rec(
        subject: &str,
        diagnosis: Diagnosis,
        device: Device,
        age: f64,
        duration_s: f64,
        n_cycles: usize,
    ) -> RecordingMeta {
        let cycles = (0..n_cycles)
            .map(|i| {
                let w = duration_s / n_cycles as f64;
                CycleAnnotation::new(i as f64 * w, (i + 1) as f64 * w, i % 2 == 0, i % 3 == 0)
                    .unwrap()
            })
            .collect();
        RecordingMeta::new(
            subject.to_string(),
            diagnosis,
            device,
            age,
            Sex::M,
            format!("{subject}.wav"),
            duration_s,
            cycles,
        )
        .unwrap()
    }

    #[test]
    fn tokens_round_trip() {
        for d in Diagnosis::ALL {
            assert_eq!(Diagnosis::from_token(d.token()), Some(d));
        }
        for d in Device::ALL {
            assert_eq!(Device::from_token(d.token()), Some(d));
        }
        assert_eq!(Diagnosis::from_token("ASTMA"), None);
    }

    #[test]
    fn recording_invariants_enforced() {
        assert!(matches!(
            RecordingMeta::new(
                "s1".into(),
                Diagnosis::Copd,
                Device::Meditron,
                60.0,
                Sex::F,
                "a.wav".into(),
                0.0,
                vec![]
            ),
            Err(DatasetError::NonPositiveDuration { .. })
        ));
        let bad_cycle = CycleAnnotation {
            start_s: 1.0,
            end_s: 25.0,
            crackles: false,
            wheezes: false,
        };
        assert!(matches!(
            RecordingMeta::new(
                "s1".into(),
                Diagnosis::Copd,
                Device::Meditron,
                60.0,
                Sex::F,
                "a.wav".into(),
                20.0,
                vec![bad_cycle]
            ),
            Err(DatasetError::CycleOutOfRange { .. })
        ));
        assert!(CycleAnnotation::new(3.0, 2.0, false, false).is_err());
    }

    #[test]
    fn stats_hand_count_on_three_rows() {
        // Subject with two recordings of one class: counted once as a
        // subject, both recordings in the duration/cycle totals.
        let recs = vec![
            rec("a", Diagnosis::Copd, Device::Meditron, 65.0, 20.0, 5),
            rec("a", Diagnosis::Copd, Device::Meditron, 65.0, 15.0, 3),
            rec("b", Diagnosis::Urti, Device::Microphone, 7.0, 10.0, 2),
        ];
        let stats = compute_stats(&recs, &StatsOptions::default()).unwrap();
        assert_eq!(stats.class_counts[&Diagnosis::Copd], 1);
        assert_eq!(stats.class_counts[&Diagnosis::Urti], 1);
        assert_eq!(stats.total_subjects, 2);
        assert_eq!(stats.total_recordings, 3);
        assert!((stats.class_durations_s[&Diagnosis::Copd] - 35.0).abs() < 1e-12);
        assert_eq!(stats.class_cycle_counts[&Diagnosis::Copd], 8);
        assert_eq!(stats.class_by_age_group[&Diagnosis::Copd][6], 1);
        assert_eq!(stats.class_by_age_group[&Diagnosis::Urti][0], 1);
        assert_eq!(
            stats.class_by_device[&Diagnosis::Copd][&Device::Meditron],
            1
        );
    }

    #[test]
    fn stats_single_recording_totals() {
        let recs = vec![rec("a", Diagnosis::Healthy, Device::Meditron, 30.0, 10.0, 4)];
        let stats = compute_stats(&recs, &StatsOptions::default()).unwrap();
        assert_eq!(stats.class_counts[&Diagnosis::Healthy], 1);
        assert_eq!(stats.class_durations_s[&Diagnosis::Healthy], 10.0);
        assert_eq!(stats.class_cycle_counts[&Diagnosis::Healthy], 4);
    }

    #[test]
    fn stats_age_clamps_to_last_group() {
        let recs = vec![rec("a", Diagnosis::Healthy, Device::Meditron, 130.0, 10.0, 0)];
        let stats = compute_stats(&recs, &StatsOptions::default()).unwrap();
        assert_eq!(
            stats.class_by_age_group[&Diagnosis::Healthy][AGE_GROUPS - 1],
            1
        );
    }

    #[test]
    fn stats_row_sums_match_class_counts() {
        let recs = vec![
            rec("a", Diagnosis::Copd, Device::Meditron, 65.0, 20.0, 5),
            rec("b", Diagnosis::Copd, Device::Meditron, 42.0, 20.0, 5),
            rec("c", Diagnosis::Urti, Device::Meditron, 7.0, 10.0, 2),
        ];
        let stats = compute_stats(&recs, &StatsOptions::default()).unwrap();
        for (diag, row) in &stats.class_by_age_group {
            assert_eq!(row.iter().sum::<usize>(), stats.class_counts[diag]);
        }
        assert_eq!(
            stats.class_counts.values().sum::<usize>(),
            stats.total_subjects
        );
    }

    #[test]
    fn stats_empty_needs_waiver() {
        assert!(matches!(
            compute_stats(&[], &StatsOptions::default()),
            Err(DatasetError::EmptyInput)
        ));
        let stats = compute_stats(
            &[],
            &StatsOptions {
                allow_empty: true,
                ..StatsOptions::default()
            },
        )
        .unwrap();
        assert_eq!(stats.total_subjects, 0);
    }

    #[test]
    fn stats_conflicting_diagnosis_rejected() {
        let recs = vec![
            rec("a", Diagnosis::Copd, Device::Meditron, 65.0, 20.0, 0),
            rec("a", Diagnosis::Urti, Device::Meditron, 65.0, 20.0, 0),
        ];
        assert!(matches!(
            compute_stats(&recs, &StatsOptions::default()),
            Err(DatasetError::ConflictingDiagnosis { .. })
        ));
    }

    #[test]
    fn select_keeps_device_and_drops_classes() {
        let recs = vec![
            rec("a", Diagnosis::Copd, Device::Meditron, 65.0, 20.0, 0),
            rec("b", Diagnosis::Asthma, Device::Meditron, 12.0, 20.0, 0),
            rec("c", Diagnosis::Copd, Device::Microphone, 70.0, 20.0, 0),
            rec("d", Diagnosis::Urti, Device::Meditron, 30.0, 20.0, 0),
        ];
        let drop: BTreeSet<Diagnosis> = [Diagnosis::Asthma, Diagnosis::Pneumonia, Diagnosis::Lrti]
            .into_iter()
            .collect();
        let kept = select_subset(&recs, Device::Meditron, &drop).unwrap();
        let ids: Vec<&str> = kept.iter().map(|r| r.subject_id.as_str()).collect();
        assert_eq!(ids, vec!["a", "d"]);
    }

    #[test]
    fn select_identity_when_nothing_dropped() {
        let recs = vec![
            rec("a", Diagnosis::Copd, Device::Meditron, 65.0, 20.0, 0),
            rec("b", Diagnosis::Urti, Device::Meditron, 30.0, 20.0, 0),
        ];
        let kept = select_subset(&recs, Device::Meditron, &BTreeSet::new()).unwrap();
        assert_eq!(kept, recs);
    }

    #[test]
    fn select_is_idempotent() {
        let recs = vec![
            rec("a", Diagnosis::Copd, Device::Meditron, 65.0, 20.0, 0),
            rec("b", Diagnosis::Asthma, Device::Meditron, 12.0, 20.0, 0),
            rec("c", Diagnosis::Urti, Device::Microphone, 30.0, 20.0, 0),
        ];
        let drop: BTreeSet<Diagnosis> = [Diagnosis::Asthma].into_iter().collect();
        let once = select_subset(&recs, Device::Meditron, &drop).unwrap();
        let twice = select_subset(&once, Device::Meditron, &drop).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn select_empty_is_an_error() {
        let recs = vec![rec("a", Diagnosis::Copd, Device::Microphone, 65.0, 20.0, 0)];
        assert!(matches!(
            select_subset(&recs, Device::Meditron, &BTreeSet::new()),
            Err(DatasetError::EmptySelection { .. })
        ));
    }

    #[test]
    fn split_two_subjects_forced_one_each() {
        let recs = vec![
            rec("a", Diagnosis::Copd, Device::Meditron, 65.0, 20.0, 0),
            rec("b", Diagnosis::Copd, Device::Meditron, 42.0, 20.0, 0),
        ];
        let split = split_subjects(&recs, 0.5, 7).unwrap();
        assert_eq!(split.train_subjects.len(), 1);
        assert_eq!(split.test_subjects.len(), 1);
        assert_eq!(split.classes, vec![Diagnosis::Copd]);
    }

    #[test]
    fn split_deterministic_per_seed() {
        let recs: Vec<RecordingMeta> = (0..12)
            .map(|i| {
                rec(
                    &format!("s{i}"),
                    if i % 2 == 0 {
                        Diagnosis::Copd
                    } else {
                        Diagnosis::Urti
                    },
                    Device::Meditron,
                    20.0 + i as f64,
                    20.0,
                    0,
                )
            })
            .collect();
        let a = split_subjects(&recs, 0.25, 99).unwrap();
        let b = split_subjects(&recs, 0.25, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_single_subject_class_named_in_error() {
        let recs = vec![
            rec("a", Diagnosis::Copd, Device::Meditron, 65.0, 20.0, 0),
            rec("b", Diagnosis::Copd, Device::Meditron, 42.0, 20.0, 0),
            rec("c", Diagnosis::Bronchiolitis, Device::Meditron, 3.0, 20.0, 0),
        ];
        match split_subjects(&recs, 0.2, 0).unwrap_err() {
            DatasetError::UnsatisfiableSplit { class } => assert_eq!(class, "Bronchiolitis"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let recs = vec![
            rec("a", Diagnosis::Copd, Device::Meditron, 65.0, 20.0, 0),
            rec("b", Diagnosis::Copd, Device::Meditron, 42.0, 20.0, 0),
        ];
        assert!(split_subjects(&recs, 0.0, 0).is_err());
        assert!(split_subjects(&recs, 1.0, 0).is_err());
    }
}
