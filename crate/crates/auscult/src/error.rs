//! Application errors and their exit-code mapping.
//!
//! Exit codes: 1 for usage errors, 2 for data errors (files, parsing,
//! dataset contracts), 3 for numeric failures (NaN loss, non-finite
//! activations).

use std::path::PathBuf;

use auscult_core::audio::AudioError;
use auscult_core::bench::BenchMathError;
use auscult_core::dataset::DatasetError;
use auscult_core::eval::EvalError;
use auscult_core::model::ModelError;
use auscult_core::nn::NnError;
use auscult_core::train::TrainError;

/// Exit code for usage errors (bad flags, invalid combinations).
pub const EXIT_USAGE: i32 = 1;
/// Exit code for data errors (missing/malformed files, dataset contracts).
pub const EXIT_DATA: i32 = 2;
/// Exit code for numeric failures during training or inference.
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {detail}")]
    Parse {
        path: PathBuf,
        /// 1-based line number; 0 when the error is not tied to a line.
        line: usize,
        detail: String,
    },
    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    BenchMath(#[from] BenchMathError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, detail: impl Into<String>) -> Self {
        AppError::Parse {
            path: path.into(),
            line,
            detail: detail.into(),
        }
    }

    pub fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        AppError::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }

    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => EXIT_USAGE,
            AppError::Train(TrainError::NanLoss { .. }) => EXIT_NUMERIC,
            AppError::Train(TrainError::NonFiniteBatch { .. }) => EXIT_NUMERIC,
            AppError::Train(TrainError::Nn(NnError::NonFinite { .. })) => EXIT_NUMERIC,
            AppError::Nn(NnError::NonFinite { .. }) => EXIT_NUMERIC,
            AppError::Audio(AudioError::NonFinite) => EXIT_NUMERIC,
            _ => EXIT_DATA,
        }
    }
}

pub type Result<T> = std::result::Result<T, AppError>;
