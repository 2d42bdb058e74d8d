//! The raw-waveform audio classifier and its demographic late-fusion variant.
//!
//! The audio trunk follows the EnvNet pattern: two 1-D convolutions over the
//! raw waveform, a non-overlapping max-pool, a reshape that treats the
//! (channels x time) feature map as a one-channel image, a stack of 2-D
//! convolution blocks with pooling, then dense layers into a softmax over the
//! classes. The fusion variant concatenates a demographic one-hot vector with
//! the flattened audio features; everything after that point is the same
//! dense head, so a fusion model whose demographic weight columns are zero is
//! functionally identical to the audio-only model.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{Diagnosis, Sex, AGE_GROUPS};
use crate::nn::{CostReport, GraphBuilder, LayerSpec, ModelGraph, NnError};
use crate::tensor::Scalar;

/// Name of the auxiliary input port carrying the demographic vector.
pub const DEMOGRAPHICS_PORT: &str = "demographics";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("age must be non-negative, got {0}")]
    NegativeAge(f64),
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// One-hot demographic encoding: 10 decade age groups, optionally 2 gender
/// entries. Unknown values encode as all-zero blocks, so the vector is always
/// well formed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemographicVector {
    /// Age group index (`min(floor(age / 10), 9)`), `None` when unknown.
    age_group: Option<usize>,
    sex: Sex,
    include_gender: bool,
}

impl DemographicVector {
    pub fn age_group(&self) -> Option<usize> {
        self.age_group
    }

    pub fn age_group_onehot(&self) -> [f32; AGE_GROUPS] {
        let mut v = [0.0; AGE_GROUPS];
        if let Some(g) = self.age_group {
            v[g] = 1.0;
        }
        v
    }

    /// `None` when the gender feature is disabled.
    pub fn gender_onehot(&self) -> Option<[f32; 2]> {
        if !self.include_gender {
            return None;
        }
        let mut v = [0.0; 2];
        match self.sex {
            Sex::M => v[0] = 1.0,
            Sex::F => v[1] = 1.0,
            Sex::Unknown => {}
        }
        Some(v)
    }

    /// Flat feature vector fed to the fusion port.
    pub fn to_features(&self) -> Vec<f32> {
        let mut out = self.age_group_onehot().to_vec();
        if let Some(g) = self.gender_onehot() {
            out.extend_from_slice(&g);
        }
        out
    }

    pub fn dim(&self) -> usize {
        AGE_GROUPS + if self.include_gender { 2 } else { 0 }
    }
}

/// Encodes age and sex as one-hot blocks. Unknown age (or `Sex::Unknown`)
/// yields an all-zero block; ages of 90 and above clamp into the last group.
pub fn encode_demographics(
    age_years: Option<f64>,
    sex: Sex,
    include_gender: bool,
) -> Result<DemographicVector, ModelError> {
    let age_group = match age_years {
        None => None,
        Some(age) => {
            if !(age >= 0.0) || !age.is_finite() {
                return Err(ModelError::NegativeAge(age));
            }
            Some(((age / 10.0).floor() as usize).min(AGE_GROUPS - 1))
        }
    };
    Ok(DemographicVector {
        age_group,
        sex,
        include_gender,
    })
}

/// Hyperparameters of one 1-D convolution stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conv1dCfg {
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

/// One 2-D convolution block: 3x3-style conv followed by a non-overlapping
/// max-pool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conv2dBlockCfg {
    pub channels: usize,
    pub kernel: [usize; 2],
    pub pool: [usize; 2],
}

/// Demographic fusion settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionCfg {
    pub enabled: bool,
    /// Adds the 2-entry gender one-hot to the age-group vector.
    #[serde(default)]
    pub include_gender: bool,
}

/// Full description of a classifier: input geometry, class list, and the
/// layer hyperparameters of the audio trunk and dense head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub window_s: f64,
    pub sample_rate_hz: u32,
    pub classes: Vec<String>,
    pub conv1: Conv1dCfg,
    pub conv2: Conv1dCfg,
    /// Non-overlapping max-pool after the 1-D stage.
    pub pool1d: usize,
    pub conv2d_blocks: Vec<Conv2dBlockCfg>,
    /// Hidden dense widths between the flatten (or fusion concat) and the
    /// output layer; these are the fusion-layer widths when fusion is on.
    pub dense: Vec<usize>,
    pub fusion: FusionCfg,
}

impl ModelConfig {
    /// Samples per input frame.
    pub fn input_len(&self) -> usize {
        (self.window_s * self.sample_rate_hz as f64).round() as usize
    }

    /// Width of the demographic vector this config expects.
    pub fn demographic_dim(&self) -> usize {
        AGE_GROUPS + if self.fusion.include_gender { 2 } else { 0 }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.window_s > 0.0) {
            return Err(ModelError::InvalidConfig("window_s must be positive".into()));
        }
        if self.sample_rate_hz == 0 {
            return Err(ModelError::InvalidConfig(
                "sample_rate_hz must be positive".into(),
            ));
        }
        if self.classes.len() < 2 {
            return Err(ModelError::InvalidConfig(format!(
                "need at least 2 classes, got {}",
                self.classes.len()
            )));
        }
        for (what, v) in [
            ("conv1.channels", self.conv1.channels),
            ("conv1.kernel", self.conv1.kernel),
            ("conv1.stride", self.conv1.stride),
            ("conv2.channels", self.conv2.channels),
            ("conv2.kernel", self.conv2.kernel),
            ("conv2.stride", self.conv2.stride),
            ("pool1d", self.pool1d),
        ] {
            if v == 0 {
                return Err(ModelError::InvalidConfig(format!("{what} must be positive")));
            }
        }
        for (i, b) in self.conv2d_blocks.iter().enumerate() {
            if b.channels == 0 || b.kernel.contains(&0) || b.pool.contains(&0) {
                return Err(ModelError::InvalidConfig(format!(
                    "conv2d_blocks[{i}] has a zero hyperparameter"
                )));
            }
        }
        if self.dense.contains(&0) {
            return Err(ModelError::InvalidConfig("dense widths must be positive".into()));
        }
        Ok(())
    }
}

/// A built classifier graph with its cost report attached.
#[derive(Clone, Debug)]
pub struct ModelBuild<F> {
    pub graph: ModelGraph<F>,
    pub cost: CostReport,
}

fn build_trunk(cfg: &ModelConfig, with_fusion: bool) -> Result<GraphBuilder, ModelError> {
    cfg.validate()?;
    let input_len = cfg.input_len();
    let mut builder = GraphBuilder::new(&[1, input_len]);
    if with_fusion {
        builder = builder.aux_port(DEMOGRAPHICS_PORT, cfg.demographic_dim());
    }
    builder = builder
        .push(LayerSpec::Conv1d {
            in_channels: 1,
            out_channels: cfg.conv1.channels,
            kernel: cfg.conv1.kernel,
            stride: cfg.conv1.stride,
        })?
        .push(LayerSpec::Relu)?
        .push(LayerSpec::Conv1d {
            in_channels: cfg.conv1.channels,
            out_channels: cfg.conv2.channels,
            kernel: cfg.conv2.kernel,
            stride: cfg.conv2.stride,
        })?
        .push(LayerSpec::Relu)?
        .push(LayerSpec::max_pool1d(cfg.pool1d))?;

    // Treat the (channels x time) map as a one-channel image.
    let shape = builder.current_shape().to_vec();
    builder = builder.push(LayerSpec::Reshape {
        shape: vec![1, shape[0], shape[1]],
    })?;

    let mut in_channels = 1;
    for block in &cfg.conv2d_blocks {
        builder = builder
            .push(LayerSpec::Conv2d {
                in_channels,
                out_channels: block.channels,
                kernel: block.kernel,
                stride: [1, 1],
            })?
            .push(LayerSpec::Relu)?
            .push(LayerSpec::max_pool2d(block.pool))?;
        in_channels = block.channels;
    }
    builder = builder.push(LayerSpec::Flatten)?;
    Ok(builder)
}

fn build_head(
    mut builder: GraphBuilder,
    cfg: &ModelConfig,
    with_fusion: bool,
) -> Result<GraphBuilder, ModelError> {
    if with_fusion {
        builder = builder.push(LayerSpec::Concat {
            port: DEMOGRAPHICS_PORT.to_string(),
        })?;
    }
    let mut width = builder.current_shape()[0];
    for &hidden in &cfg.dense {
        builder = builder
            .push(LayerSpec::Dense {
                inputs: width,
                outputs: hidden,
            })?
            .push(LayerSpec::Relu)?;
        width = hidden;
    }
    builder = builder
        .push(LayerSpec::Dense {
            inputs: width,
            outputs: cfg.classes.len(),
        })?
        .push(LayerSpec::Softmax)?;
    Ok(builder)
}

/// Builds the audio-only classifier. The fusion flag must be off.
pub fn build_audio_model<F: Scalar>(cfg: &ModelConfig) -> Result<ModelBuild<F>, ModelError> {
    if cfg.fusion.enabled {
        return Err(ModelError::InvalidConfig(
            "fusion flag is on; use build_fusion_model".into(),
        ));
    }
    let builder = build_head(build_trunk(cfg, false)?, cfg, false)?;
    let graph = builder.build_as::<F>()?;
    let cost = graph.cost();
    Ok(ModelBuild { graph, cost })
}

/// Builds the fusion classifier: the same trunk up to the flatten point, the
/// demographic port concatenated there, then the dense head.
pub fn build_fusion_model<F: Scalar>(cfg: &ModelConfig) -> Result<ModelBuild<F>, ModelError> {
    if !cfg.fusion.enabled {
        return Err(ModelError::InvalidConfig(
            "fusion flag is off; use build_audio_model".into(),
        ));
    }
    let builder = build_head(build_trunk(cfg, true)?, cfg, true)?;
    let graph = builder.build_as::<F>()?;
    let cost = graph.cost();
    Ok(ModelBuild { graph, cost })
}

/// Builds whichever variant the config's fusion flag selects.
pub fn build_model<F: Scalar>(cfg: &ModelConfig) -> Result<ModelBuild<F>, ModelError> {
    if cfg.fusion.enabled {
        build_fusion_model(cfg)
    } else {
        build_audio_model(cfg)
    }
}

fn retained_class_names() -> Vec<String> {
    Diagnosis::RETAINED
        .iter()
        .map(|d| d.token().to_string())
        .collect()
}

/// The shipped audio-only configuration: 5 s frames at 44.1 kHz (input
/// 1x220500), sized to land near 320k parameters and 0.194 GFLOPs per
/// inference under the declared counting convention.
pub fn default_audio_config() -> ModelConfig {
    ModelConfig {
        window_s: 5.0,
        sample_rate_hz: 44_100,
        classes: retained_class_names(),
        conv1: Conv1dCfg {
            channels: 16,
            kernel: 64,
            stride: 8,
        },
        conv2: Conv1dCfg {
            channels: 32,
            kernel: 16,
            stride: 4,
        },
        pool1d: 4,
        conv2d_blocks: vec![
            Conv2dBlockCfg {
                channels: 8,
                kernel: [3, 3],
                pool: [2, 4],
            },
            Conv2dBlockCfg {
                channels: 16,
                kernel: [3, 3],
                pool: [2, 3],
            },
            Conv2dBlockCfg {
                channels: 32,
                kernel: [3, 3],
                pool: [2, 2],
            },
        ],
        dense: vec![64, 64],
        fusion: FusionCfg {
            enabled: false,
            include_gender: false,
        },
    }
}

/// The shipped fusion configuration: identical trunk and head widths, with
/// the age-group vector concatenated at the flatten point.
pub fn default_fusion_config() -> ModelConfig {
    ModelConfig {
        fusion: FusionCfg {
            enabled: true,
            include_gender: false,
        },
        ..default_audio_config()
    }
}
