//! Property tests for the dataset, audio, and engine invariants.

use std::collections::BTreeSet;

use proptest::prelude::*;

use auscult_core::audio::{extract_frames, frame_count, Waveform};
use auscult_core::dataset::{
    compute_stats, select_subset, split_subjects, CycleAnnotation, Device, Diagnosis,
    RecordingMeta, Sex, StatsOptions,
};
use auscult_core::nn::{GraphBuilder, LayerSpec};
use auscult_core::tensor::Tensor;

fn any_diagnosis() -> impl Strategy<Value = Diagnosis> {
    (0..Diagnosis::ALL.len()).prop_map(|i| Diagnosis::ALL[i])
}

fn any_device() -> impl Strategy<Value = Device> {
    (0..Device::ALL.len()).prop_map(|i| Device::ALL[i])
}

fn any_recording() -> impl Strategy<Value = (usize, Diagnosis, Device, f64, f64, usize)> {
    (
        0usize..40,
        any_diagnosis(),
        any_device(),
        0.0f64..100.0,
        1.0f64..60.0,
        0usize..8,
    )
}

fn build_recordings(rows: Vec<(usize, Diagnosis, Device, f64, f64, usize)>) -> Vec<RecordingMeta> {
    // Subject identity pins diagnosis and age so fixtures stay consistent.
    let mut seen: std::collections::BTreeMap<usize, (Diagnosis, f64)> = Default::default();
    rows.into_iter()
        .map(|(subj, diag, device, age, dur, n_cycles)| {
            let (diag, age) = *seen.entry(subj).or_insert((diag, age));
            let cycles = (0..n_cycles)
                .map(|i| {
                    let w = dur / n_cycles as f64;
                    CycleAnnotation::new(i as f64 * w, (i as f64 + 0.9) * w, i % 2 == 0, i % 3 == 0)
                        .unwrap()
                })
                .collect();
            RecordingMeta::new(
                format!("subj{subj}"),
                diag,
                device,
                age,
                Sex::Unknown,
                format!("subj{subj}.wav"),
                dur,
                cycles,
            )
            .unwrap()
        })
        .collect()
}

proptest! {
    /// Train and test subject sets are always disjoint, and every class in
    /// the split appears on both sides.
    #[test]
    fn split_subjects_is_subject_exclusive(
        rows in proptest::collection::vec(any_recording(), 4..60),
        frac in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let recordings = build_recordings(rows);
        match split_subjects(&recordings, frac, seed) {
            Ok(split) => {
                let overlap: Vec<_> = split.train_subjects.intersection(&split.test_subjects).collect();
                prop_assert!(overlap.is_empty(), "overlap: {overlap:?}");
                let by_subject: std::collections::BTreeMap<&str, Diagnosis> = recordings
                    .iter()
                    .map(|r| (r.subject_id.as_str(), r.diagnosis))
                    .collect();
                for class in &split.classes {
                    let train_has = split.train_subjects.iter().any(|s| by_subject[s.as_str()] == *class);
                    let test_has = split.test_subjects.iter().any(|s| by_subject[s.as_str()] == *class);
                    prop_assert!(train_has && test_has, "class {class:?} missing a side");
                }
                for r in &recordings {
                    prop_assert!(split.classes.contains(&r.diagnosis));
                }
            }
            // Single-subject classes legitimately refuse to split.
            Err(e) => prop_assert!(format!("{e}").contains("single subject"), "unexpected: {e}"),
        }
    }

    /// Statistics do not depend on the order of the manifest rows.
    #[test]
    fn stats_are_permutation_invariant(
        rows in proptest::collection::vec(any_recording(), 1..40),
        rotate in 0usize..40,
    ) {
        let recordings = build_recordings(rows);
        let mut rotated = recordings.clone();
        rotated.rotate_left(rotate % recordings.len().max(1));
        let a = compute_stats(&recordings, &StatsOptions::default()).unwrap();
        let b = compute_stats(&rotated, &StatsOptions::default()).unwrap();
        prop_assert_eq!(&a.class_counts, &b.class_counts);
        prop_assert_eq!(&a.class_by_age_group, &b.class_by_age_group);
        prop_assert_eq!(&a.class_by_device, &b.class_by_device);
        prop_assert_eq!(&a.class_cycle_counts, &b.class_cycle_counts);
        prop_assert_eq!(a.total_subjects, b.total_subjects);
        // Duration sums may differ by accumulation order, within tolerance.
        for (diag, dur) in &a.class_durations_s {
            prop_assert!((dur - b.class_durations_s[diag]).abs() < 1e-9);
        }
    }

    /// Per-class durations sum to the total duration of the retained rows.
    #[test]
    fn stats_durations_sum_to_total(
        rows in proptest::collection::vec(any_recording(), 1..40),
    ) {
        let recordings = build_recordings(rows);
        let stats = compute_stats(&recordings, &StatsOptions::default()).unwrap();
        let expect: f64 = recordings.iter().map(|r| r.duration_s).sum();
        prop_assert!((stats.total_duration_s() - expect).abs() < 1e-9);
    }

    /// Selecting twice with the same arguments equals selecting once.
    #[test]
    fn select_subset_is_idempotent(
        rows in proptest::collection::vec(any_recording(), 1..40),
        device in any_device(),
        drop_mask in 0u8..=255,
    ) {
        let recordings = build_recordings(rows);
        let drop: BTreeSet<Diagnosis> = Diagnosis::ALL
            .iter()
            .enumerate()
            .filter(|(i, _)| drop_mask & (1 << i) != 0)
            .map(|(_, &d)| d)
            .collect();
        if let Ok(once) = select_subset(&recordings, device, &drop) {
            let twice = select_subset(&once, device, &drop).unwrap();
            prop_assert_eq!(once, twice);
        }
    }

    /// Frames from a waveform: the count matches the closed-form formula and
    /// every frame is the matching contiguous slice of its source.
    #[test]
    fn frames_are_contiguous_and_counted(
        seconds in 1u32..30,
        rate in prop::sample::select(vec![100u32, 250, 1000]),
        window_ticks in 1u32..8,
        stride_ticks in 1u32..4,
    ) {
        let n = (seconds * rate) as usize;
        let samples: Vec<f32> = (0..n).map(|i| ((i * 2654435761usize) % 2000) as f32 / 1000.0 - 1.0).collect();
        let w = Waveform::new(samples, rate).unwrap();
        let meta = RecordingMeta::new(
            "s".into(),
            Diagnosis::Copd,
            Device::Meditron,
            50.0,
            Sex::M,
            "s.wav".into(),
            w.duration_s(),
            vec![],
        )
        .unwrap();
        let window_s = window_ticks as f64 * 0.5;
        let stride_s = stride_ticks as f64 * 0.5;
        let out = extract_frames(&w, &meta, window_s, stride_s);
        let counted = frame_count(w.duration_s(), window_s, stride_s);
        prop_assert_eq!(out.frames.len(), counted.frames);
        let window_n = (window_s * rate as f64).round() as usize;
        let stride_n = (stride_s * rate as f64).round() as usize;
        for (i, frame) in out.frames.iter().enumerate() {
            prop_assert_eq!(frame.samples.len(), window_n);
            let start = i * stride_n;
            prop_assert_eq!(&frame.samples[..], &w.samples()[start..start + window_n]);
        }
    }

    /// Softmax output sums to one for logits up to 1e4 in magnitude.
    #[test]
    fn softmax_normalizes_large_logits(
        logits in proptest::collection::vec(-1e4f64..1e4, 2..12),
    ) {
        let n = logits.len();
        let g = GraphBuilder::new(&[n])
            .push(LayerSpec::Softmax)
            .unwrap()
            .build()
            .unwrap();
        let out = g.forward_simple(&Tensor::from_vec(logits)).unwrap();
        let sum: f64 = out.data().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-6, "sum {sum}");
        prop_assert!(out.data().iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    /// Max-pool with kernel 1 is the identity.
    #[test]
    fn pool_kernel_one_identity(
        data in proptest::collection::vec(-1.0f64..1.0, 12),
    ) {
        let g = GraphBuilder::new(&[3, 4])
            .push(LayerSpec::max_pool1d(1))
            .unwrap()
            .build()
            .unwrap();
        let x = Tensor::new(vec![3, 4], data).unwrap();
        let y = g.forward_simple(&x).unwrap();
        prop_assert_eq!(y.data(), x.data());
    }
}

/// Frame augmentation preserves class proportions at the recording level.
#[test]
fn augmentation_preserves_class_proportions() {
    let rate = 100u32;
    let mk = |subject: &str, diag: Diagnosis, seconds: usize| {
        let n = seconds * rate as usize;
        let w = Waveform::new(vec![0.5; n], rate).unwrap();
        let meta = RecordingMeta::new(
            subject.into(),
            diag,
            Device::Meditron,
            50.0,
            Sex::M,
            format!("{subject}.wav"),
            seconds as f64,
            vec![],
        )
        .unwrap();
        extract_frames(&w, &meta, 5.0, 1.0).frames
    };
    let mut per_class = std::collections::BTreeMap::new();
    for (subject, diag, seconds) in [
        ("a", Diagnosis::Copd, 20),
        ("b", Diagnosis::Copd, 10),
        ("c", Diagnosis::Urti, 15),
    ] {
        let frames = mk(subject, diag, seconds);
        let expect = frame_count(seconds as f64, 5.0, 1.0).frames;
        assert_eq!(frames.len(), expect);
        *per_class.entry(diag).or_insert(0usize) += frames.len();
    }
    assert_eq!(per_class[&Diagnosis::Copd], 16 + 6);
    assert_eq!(per_class[&Diagnosis::Urti], 11);
}
