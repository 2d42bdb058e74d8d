//! Confusion matrices, per-class sensitivity, accuracy, and model
//! evaluation at frame and subject level.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::nn::ModelGraph;
use crate::tensor::{Scalar, Tensor};
use crate::train::{argmax, LabeledExample, TrainError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("truth and prediction lists differ in length ({truth} vs {pred})")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("class index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },
    #[error("nothing to evaluate")]
    Empty,
}

/// Classification metrics over one set of (truth, prediction) pairs.
///
/// `confusion[t][p]` counts frames of true class `t` predicted as `p`.
/// Sensitivity of a class absent from the evaluation set is `None`
/// (undefined), not zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub class_names: Vec<String>,
    pub confusion: Vec<Vec<usize>>,
    pub per_class_sensitivity: Vec<Option<f64>>,
    pub accuracy: f64,
    pub total: usize,
}

impl EvalReport {
    /// Builds the report from parallel truth/prediction index lists.
    pub fn from_pairs(
        truth: &[usize],
        pred: &[usize],
        class_names: Vec<String>,
    ) -> Result<Self, EvalError> {
        if truth.len() != pred.len() {
            return Err(EvalError::LengthMismatch {
                truth: truth.len(),
                pred: pred.len(),
            });
        }
        if truth.is_empty() {
            return Err(EvalError::Empty);
        }
        let classes = class_names.len();
        let mut confusion = vec![vec![0usize; classes]; classes];
        for (&t, &p) in truth.iter().zip(pred) {
            if t >= classes {
                return Err(EvalError::ClassOutOfRange { index: t, classes });
            }
            if p >= classes {
                return Err(EvalError::ClassOutOfRange { index: p, classes });
            }
            confusion[t][p] += 1;
        }
        Ok(Self::from_confusion(confusion, class_names))
    }

    /// Builds the report from an existing confusion matrix (rows = truth).
    pub fn from_confusion(confusion: Vec<Vec<usize>>, class_names: Vec<String>) -> Self {
        let total: usize = confusion.iter().flatten().sum();
        let trace: usize = (0..confusion.len()).map(|c| confusion[c][c]).sum();
        let per_class_sensitivity = confusion
            .iter()
            .enumerate()
            .map(|(c, row)| {
                let row_sum: usize = row.iter().sum();
                if row_sum == 0 {
                    None
                } else {
                    Some(confusion[c][c] as f64 / row_sum as f64)
                }
            })
            .collect();
        let accuracy = if total == 0 {
            0.0
        } else {
            trace as f64 / total as f64
        };
        Self {
            class_names,
            confusion,
            per_class_sensitivity,
            accuracy,
            total,
        }
    }

    /// Classes absent from the evaluation set (undefined sensitivity).
    pub fn undefined_classes(&self) -> Vec<&str> {
        self.per_class_sensitivity
            .iter()
            .zip(&self.class_names)
            .filter_map(|(s, name)| s.is_none().then_some(name.as_str()))
            .collect()
    }
}

/// Majority vote over class indices; ties resolve to the lowest index.
pub fn majority_vote(votes: &[usize], classes: usize) -> usize {
    let mut counts = vec![0usize; classes];
    for &v in votes {
        counts[v] += 1;
    }
    argmax(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>())
}

/// Frame-level metrics plus the subject-level variant where each subject's
/// frames are aggregated by majority vote.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub frame_level: EvalReport,
    pub subject_level: EvalReport,
}

/// Runs `graph` over `examples` and produces frame- and subject-level
/// reports. Prediction is the argmax of the output probabilities with
/// lowest-index tie-breaking.
pub fn evaluate<F: Scalar>(
    graph: &ModelGraph<F>,
    examples: &[LabeledExample],
    class_names: Vec<String>,
) -> Result<EvalOutcome, TrainError> {
    if examples.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let classes = graph.output_shape()[0];
    let input_shape = graph.input_shape().to_vec();
    let needs_aux = !graph.aux_ports().is_empty();
    let mut truth = Vec::with_capacity(examples.len());
    let mut pred = Vec::with_capacity(examples.len());
    let mut by_group: BTreeMap<&str, (usize, Vec<usize>)> = BTreeMap::new();
    for ex in examples {
        if ex.label >= classes {
            return Err(TrainError::LabelOutOfRange {
                label: ex.label,
                classes,
            });
        }
        let data: Vec<F> = ex.input.iter().map(|&v| F::from_f64(v as f64)).collect();
        let input = Tensor::new(input_shape.clone(), data).map_err(|_| {
            TrainError::InvalidConfig("example input does not match model input shape".into())
        })?;
        let mut aux = BTreeMap::new();
        if needs_aux {
            let port = graph.aux_ports().keys().next().expect("one port").clone();
            let values = ex.aux.as_ref().ok_or_else(|| TrainError::MissingDemographics {
                subject_id: ex.group.clone(),
            })?;
            let data: Vec<F> = values.iter().map(|&v| F::from_f64(v as f64)).collect();
            aux.insert(port, Tensor::from_vec(data));
        }
        let probs = graph.forward(&input, &aux)?;
        let p = argmax(probs.data());
        truth.push(ex.label);
        pred.push(p);
        let entry = by_group.entry(ex.group.as_str()).or_insert((ex.label, Vec::new()));
        entry.1.push(p);
    }
    let frame_level = EvalReport::from_pairs(&truth, &pred, class_names.clone())
        .expect("non-empty validated pairs");

    let mut subj_truth = Vec::with_capacity(by_group.len());
    let mut subj_pred = Vec::with_capacity(by_group.len());
    for (label, votes) in by_group.values() {
        subj_truth.push(*label);
        subj_pred.push(majority_vote(votes, classes));
    }
    let subject_level = EvalReport::from_pairs(&subj_truth, &subj_pred, class_names)
        .expect("non-empty validated pairs");

    Ok(EvalOutcome {
        frame_level,
        subject_level,
    })
}
