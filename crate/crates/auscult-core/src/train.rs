//! Training over labeled examples: cross-entropy loss, seeded shuffling,
//! SGD/Adam updates, and patience-based early stopping on a held-out,
//! group-exclusive validation slice.
//!
//! All stochasticity (validation split, epoch shuffles) comes from one seeded
//! generator, and gradient accumulation runs in a fixed order, so two runs
//! with the same seed, config, and inputs produce bit-identical loss
//! histories and weights.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{normalize_peak, AudioFrame};
use crate::dataset::Diagnosis;
use crate::model::DemographicVector;
use crate::nn::{Adam, LayerParams, ModelGraph, NnError, Sgd};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("loss became NaN at epoch {epoch}, batch {batch}")]
    NanLoss { epoch: usize, batch: usize },
    #[error("numeric failure at epoch {epoch}, batch {batch}: {source}")]
    NonFiniteBatch {
        epoch: usize,
        batch: usize,
        source: NnError,
    },
    #[error("no demographic entry for subject '{subject_id}'")]
    MissingDemographics { subject_id: String },
    #[error("frame label {label} not in the model's class list")]
    UnknownLabel { label: String },
    #[error("label index {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// One training/evaluation example: a flat input, an optional auxiliary
/// vector for the fusion port, a class index, and the group (subject) it
/// came from.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledExample {
    pub input: Vec<f32>,
    pub aux: Option<Vec<f32>>,
    pub label: usize,
    pub group: String,
}

/// Converts audio frames into training examples for `classes`, attaching
/// demographic vectors when `demos` is given (fusion models) and applying
/// per-frame peak normalization when requested.
pub fn examples_from_frames(
    frames: &[AudioFrame],
    demos: Option<&BTreeMap<String, DemographicVector>>,
    classes: &[Diagnosis],
    normalize: bool,
) -> Result<Vec<LabeledExample>, TrainError> {
    let mut out = Vec::with_capacity(frames.len());
    for frame in frames {
        let label = classes
            .iter()
            .position(|&c| c == frame.label)
            .ok_or_else(|| TrainError::UnknownLabel {
                label: frame.label.token().to_string(),
            })?;
        let mut input = frame.samples.clone();
        if normalize {
            normalize_peak(&mut input);
        }
        let aux = match demos {
            None => None,
            Some(map) => {
                let demo =
                    map.get(&frame.subject_id)
                        .ok_or_else(|| TrainError::MissingDemographics {
                            subject_id: frame.subject_id.clone(),
                        })?;
                Some(demo.to_features())
            }
        };
        out.push(LabeledExample {
            input,
            aux,
            label,
            group: frame.subject_id.clone(),
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Training hyperparameters. The seed fixes all stochasticity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Per-epoch multiplicative learning-rate decay (1.0 = constant).
    pub lr_decay: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Epochs without validation improvement before stopping; 0 disables
    /// early stopping.
    pub patience: usize,
    /// Fraction of groups (subjects) held out for validation; 0 disables the
    /// validation slice and therefore early stopping.
    pub val_fraction: f64,
    /// Weight the loss by inverse class frequency.
    pub class_weights: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            epochs: 100,
            learning_rate: 1e-3,
            lr_decay: 1.0,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            patience: 10,
            val_fraction: 0.15,
            class_weights: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(TrainError::InvalidConfig("epochs must be positive".into()));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(TrainError::InvalidConfig(
                "learning_rate must be non-negative".into(),
            ));
        }
        if !(self.lr_decay > 0.0) {
            return Err(TrainError::InvalidConfig("lr_decay must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(TrainError::InvalidConfig(
                "val_fraction must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Loss (and validation metrics, when a validation slice exists) for one
/// epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

/// A trained graph plus its loss history.
#[derive(Clone, Debug)]
pub struct TrainOutcome<F> {
    pub graph: ModelGraph<F>,
    pub history: Vec<EpochRecord>,
    pub stopped_early: bool,
}

/// Index of the largest entry, lowest index winning ties.
pub fn argmax<F: Scalar>(values: &[F]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

struct Prepared<F> {
    input: Tensor<F>,
    aux: BTreeMap<String, Tensor<F>>,
    label: usize,
}

fn prepare<F: Scalar>(
    graph: &ModelGraph<F>,
    examples: &[LabeledExample],
) -> Result<Vec<Prepared<F>>, TrainError> {
    let classes = graph.output_shape()[0];
    let needs_aux = !graph.aux_ports().is_empty();
    if needs_aux && graph.aux_ports().len() != 1 {
        return Err(TrainError::InvalidConfig(
            "training supports at most one auxiliary port".into(),
        ));
    }
    let input_shape = graph.input_shape().to_vec();
    let input_len: usize = input_shape.iter().product();
    let mut out = Vec::with_capacity(examples.len());
    for ex in examples {
        if ex.label >= classes {
            return Err(TrainError::LabelOutOfRange {
                label: ex.label,
                classes,
            });
        }
        if ex.input.len() != input_len {
            return Err(TrainError::InvalidConfig(format!(
                "example input has {} samples, model expects {}",
                ex.input.len(),
                input_len
            )));
        }
        let data: Vec<F> = ex.input.iter().map(|&v| F::from_f64(v as f64)).collect();
        let input = Tensor::new(input_shape.clone(), data).expect("validated length");
        let mut aux = BTreeMap::new();
        if needs_aux {
            let port = graph.aux_ports().keys().next().expect("one port").clone();
            let Some(values) = ex.aux.as_ref() else {
                return Err(TrainError::MissingDemographics {
                    subject_id: ex.group.clone(),
                });
            };
            let data: Vec<F> = values.iter().map(|&v| F::from_f64(v as f64)).collect();
            aux.insert(port, Tensor::from_vec(data));
        }
        out.push(Prepared {
            input,
            aux,
            label: ex.label,
        });
    }
    Ok(out)
}

const PROB_FLOOR: f64 = 1e-12;

fn zeros_like<F: Scalar>(params: &[Option<LayerParams<F>>]) -> Vec<Option<LayerParams<F>>> {
    params
        .iter()
        .map(|slot| {
            slot.as_ref().map(|p| LayerParams {
                weight: Tensor::zeros(p.weight.shape()),
                bias: Tensor::zeros(p.bias.shape()),
            })
        })
        .collect()
}

fn zero_out<F: Scalar>(params: &mut [Option<LayerParams<F>>]) {
    for slot in params.iter_mut().flatten() {
        for v in slot.weight.data_mut() {
            *v = F::zero();
        }
        for v in slot.bias.data_mut() {
            *v = F::zero();
        }
    }
}

fn accumulate<F: Scalar>(acc: &mut [Option<LayerParams<F>>], grads: &[Option<LayerParams<F>>]) {
    for (a, g) in acc.iter_mut().zip(grads) {
        if let (Some(a), Some(g)) = (a.as_mut(), g.as_ref()) {
            for (av, &gv) in a.weight.data_mut().iter_mut().zip(g.weight.data()) {
                *av = *av + gv;
            }
            for (av, &gv) in a.bias.data_mut().iter_mut().zip(g.bias.data()) {
                *av = *av + gv;
            }
        }
    }
}

fn scale<F: Scalar>(params: &mut [Option<LayerParams<F>>], factor: F) {
    for slot in params.iter_mut().flatten() {
        for v in slot.weight.data_mut() {
            *v = *v * factor;
        }
        for v in slot.bias.data_mut() {
            *v = *v * factor;
        }
    }
}

/// Mean cross-entropy loss and accuracy of `graph` over `examples`.
fn evaluate_loss<F: Scalar>(
    graph: &ModelGraph<F>,
    prepared: &[Prepared<F>],
    class_weight: &[f64],
) -> Result<(f64, f64), TrainError> {
    let mut loss = 0.0f64;
    let mut correct = 0usize;
    for ex in prepared {
        let probs = graph.forward(&ex.input, &ex.aux)?;
        let p = probs.data()[ex.label].as_f64().max(PROB_FLOOR);
        loss += -p.ln() * class_weight[ex.label];
        if argmax(probs.data()) == ex.label {
            correct += 1;
        }
    }
    let n = prepared.len().max(1) as f64;
    Ok((loss / n, correct as f64 / prepared.len().max(1) as f64))
}

/// Trains `graph` on `examples` per `cfg` and returns the trained graph with
/// its per-epoch loss history.
///
/// When early stopping triggers (or training ends with a validation slice
/// present), the weights restored are those of the best validation epoch.
pub fn train<F: Scalar>(
    mut graph: ModelGraph<F>,
    examples: &[LabeledExample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<F>, TrainError> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let prepared = prepare(&graph, examples)?;
    let classes = graph.output_shape()[0];

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Group-exclusive validation slice.
    let groups: BTreeSet<&str> = examples.iter().map(|e| e.group.as_str()).collect();
    let mut group_list: Vec<&str> = groups.into_iter().collect();
    group_list.shuffle(&mut rng);
    let n_val_groups = ((group_list.len() as f64) * cfg.val_fraction).round() as usize;
    let val_groups: BTreeSet<&str> = group_list[..n_val_groups].iter().copied().collect();
    let mut train_idx: Vec<usize> = Vec::new();
    let mut val_idx: Vec<usize> = Vec::new();
    for (i, ex) in examples.iter().enumerate() {
        if val_groups.contains(ex.group.as_str()) {
            val_idx.push(i);
        } else {
            train_idx.push(i);
        }
    }
    if train_idx.is_empty() {
        return Err(TrainError::InvalidConfig(
            "validation slice swallowed every training group".into(),
        ));
    }

    // Optional inverse-frequency class weights, from the training slice.
    let mut class_weight = vec![1.0f64; classes];
    if cfg.class_weights {
        let mut counts = vec![0usize; classes];
        for &i in &train_idx {
            counts[prepared[i].label] += 1;
        }
        let present = counts.iter().filter(|&&c| c > 0).count().max(1);
        let total: usize = counts.iter().sum();
        for (w, &c) in class_weight.iter_mut().zip(&counts) {
            *w = if c > 0 {
                total as f64 / (present as f64 * c as f64)
            } else {
                0.0
            };
        }
    }

    let mut sgd = Sgd::new(F::from_f64(cfg.learning_rate));
    let mut adam = Adam::new(F::from_f64(cfg.learning_rate));

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut batch_grads = zeros_like(graph.params());
    let mut best: Option<(f64, Vec<Option<LayerParams<F>>>)> = None;
    let mut epochs_since_best = 0usize;
    let mut stopped_early = false;
    let early_stopping = cfg.patience > 0 && !val_idx.is_empty();

    let mut order = train_idx.clone();
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate * cfg.lr_decay.powi(epoch as i32);
        sgd.lr = F::from_f64(lr);
        adam.lr = F::from_f64(lr);

        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0f64;
        for (batch_no, batch) in order.chunks(cfg.batch_size).enumerate() {
            zero_out(&mut batch_grads);
            let mut batch_loss = 0.0f64;
            // Exploding weights surface as a non-finite activation; report
            // them with the offending batch attached.
            let numeric = |source: NnError| match source {
                NnError::NonFinite { .. } => TrainError::NonFiniteBatch {
                    epoch,
                    batch: batch_no,
                    source,
                },
                other => TrainError::Nn(other),
            };
            for &i in batch {
                let ex = &prepared[i];
                let (probs, tape) = graph.forward_cached(&ex.input, &ex.aux).map_err(numeric)?;
                let w = class_weight[ex.label];
                let p = probs.data()[ex.label].as_f64().max(PROB_FLOOR);
                batch_loss += -p.ln() * w;
                // d(-w ln p_label)/d p_i is zero except at the label entry.
                let mut grad = Tensor::zeros(probs.shape());
                grad.data_mut()[ex.label] = F::from_f64(-w / p);
                let grads = graph.backward(&tape, &grad).map_err(numeric)?;
                accumulate(&mut batch_grads, &grads.params);
            }
            if !batch_loss.is_finite() {
                return Err(TrainError::NanLoss {
                    epoch,
                    batch: batch_no,
                });
            }
            epoch_loss += batch_loss;
            scale(&mut batch_grads, F::from_f64(1.0 / batch.len() as f64));
            match cfg.optimizer {
                OptimizerKind::Sgd => sgd.step(graph.params_mut(), &batch_grads)?,
                OptimizerKind::Adam => adam.step(graph.params_mut(), &batch_grads)?,
            }
        }
        let train_loss = epoch_loss / order.len() as f64;

        let (val_loss, val_accuracy) = if val_idx.is_empty() {
            (None, None)
        } else {
            let subset: Vec<Prepared<F>> = val_idx
                .iter()
                .map(|&i| Prepared {
                    input: prepared[i].input.clone(),
                    aux: prepared[i].aux.clone(),
                    label: prepared[i].label,
                })
                .collect();
            let (l, a) = evaluate_loss(&graph, &subset, &class_weight)?;
            (Some(l), Some(a))
        };

        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_accuracy,
        });

        if early_stopping {
            let current = val_loss.expect("validation slice present");
            let improved = best.as_ref().map_or(true, |(b, _)| current < *b);
            if improved {
                best = Some((current, graph.params().to_vec()));
                epochs_since_best = 0;
            } else {
                epochs_since_best += 1;
                if epochs_since_best >= cfg.patience {
                    stopped_early = true;
                    break;
                }
            }
        }
    }

    if let Some((_, best_params)) = best {
        for (slot, restored) in graph.params_mut().iter_mut().zip(best_params) {
            *slot = restored;
        }
    }

    Ok(TrainOutcome {
        graph,
        history,
        stopped_early,
    })
}
