//! TOML configuration: model configs and the optional pipeline-defaults
//! file.
//!
//! A pipeline config supplies defaults for command flags; explicit
//! command-line flags always win. Its path comes from `--config` or the
//! `AUSCULT_CONFIG` environment variable.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use auscult_core::model::ModelConfig;
use auscult_core::train::OptimizerKind;

use crate::error::{AppError, Result};

/// Environment variable naming the default pipeline config file.
pub const CONFIG_ENV_VAR: &str = "AUSCULT_CONFIG";

pub fn load_model_config(path: impl AsRef<Path>) -> Result<ModelConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let cfg: ModelConfig =
        toml::from_str(&text).map_err(|e| AppError::format(path, format!("{e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn save_model_config(path: impl AsRef<Path>, cfg: &ModelConfig) -> Result<()> {
    let path = path.as_ref();
    let text = toml::to_string_pretty(cfg).map_err(|e| AppError::format(path, format!("{e}")))?;
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsDefaults {
    pub age_group_width_years: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectDefaults {
    pub device: Option<String>,
    pub drop_classes: Option<Vec<String>>,
    pub test_fraction: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameDefaults {
    pub window_s: Option<f64>,
    pub stride_s: Option<f64>,
    pub sample_rate_hz: Option<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainDefaults {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub lr_decay: Option<f64>,
    pub optimizer: Option<OptimizerKind>,
    pub seed: Option<u64>,
    pub patience: Option<usize>,
    pub val_fraction: Option<f64>,
    pub class_weights: Option<bool>,
    pub normalize: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchDefaults {
    pub warmup_runs: Option<usize>,
    pub measured_runs: Option<usize>,
    pub power_mw: Option<f64>,
    pub label: Option<String>,
}

/// Optional defaults for every subcommand's flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineDefaults {
    #[serde(default)]
    pub stats: StatsDefaults,
    #[serde(default)]
    pub select: SelectDefaults,
    #[serde(default)]
    pub frame: FrameDefaults,
    #[serde(default)]
    pub train: TrainDefaults,
    #[serde(default)]
    pub bench: BenchDefaults,
}

pub fn load_pipeline_defaults(path: impl AsRef<Path>) -> Result<PipelineDefaults> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    toml::from_str(&text).map_err(|e| AppError::format(path, format!("{e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use auscult_core::model::default_audio_config;

    #[test]
    fn model_config_toml_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.toml");
        let cfg = default_audio_config();
        save_model_config(&path, &cfg).unwrap();
        let back = load_model_config(&path).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn pipeline_defaults_parse() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.toml");
        fs::write(
            &path,
            "[frame]\nwindow_s = 5.0\nstride_s = 1.0\n\n[train]\nepochs = 3\noptimizer = \"sgd\"\n",
        )
        .unwrap();
        let d = load_pipeline_defaults(&path).unwrap();
        assert_eq!(d.frame.window_s, Some(5.0));
        assert_eq!(d.train.epochs, Some(3));
        assert_eq!(d.train.optimizer, Some(OptimizerKind::Sgd));
        assert_eq!(d.select.device, None);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.toml");
        fs::write(&path, "[frame]\nwidnow_s = 5.0\n").unwrap();
        assert!(load_pipeline_defaults(&path).is_err());
    }

    #[test]
    fn shipped_configs_match_the_builtin_defaults() {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let audio = load_model_config(root.join("audio_only.toml")).unwrap();
        assert_eq!(audio, default_audio_config());
        let fusion = load_model_config(root.join("fusion.toml")).unwrap();
        assert_eq!(fusion, auscult_core::model::default_fusion_config());
    }
}
