//! Evaluation-report and loss-history serialization.

use std::fs;
use std::path::Path;

use auscult_core::eval::{EvalOutcome, EvalReport};
use auscult_core::nn::CostReport;
use auscult_core::train::EpochRecord;

use crate::error::{AppError, Result};

/// Structured report written by `eval`: the metrics plus the model's cost
/// figures for context.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalArtifact {
    pub model: String,
    pub total_params: u64,
    pub total_flops: u64,
    pub flop_convention: String,
    pub frame_level: EvalReport,
    pub subject_level: EvalReport,
}

impl EvalArtifact {
    pub fn new(model: String, cost: &CostReport, outcome: EvalOutcome) -> Self {
        Self {
            model,
            total_params: cost.total_params,
            total_flops: cost.total_flops,
            flop_convention: cost.convention.clone(),
            frame_level: outcome.frame_level,
            subject_level: outcome.subject_level,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| AppError::Usage(format!("serializing eval report: {e}")))
    }
}

fn percent(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{:.1}%", v * 100.0),
        None => String::from("n/a"),
    }
}

fn metrics_row(label: &str, artifact: &EvalArtifact, report: &EvalReport) -> Vec<String> {
    let mut cells = vec![
        label.to_string(),
        format!("{}", artifact.total_params),
        format!("{:.3}B", artifact.total_flops as f64 / 1e9),
    ];
    for s in &report.per_class_sensitivity {
        cells.push(percent(*s));
    }
    cells.push(percent(Some(report.accuracy)));
    cells
}

/// Plain-text table with one row per level: model, #params, FLOPs, one
/// sensitivity column per class, accuracy.
pub fn format_eval_table(artifact: &EvalArtifact) -> String {
    let mut out = String::new();
    out.push_str(&format!("Model: {}\n", artifact.model));
    let mut header = vec![
        String::from("Level"),
        String::from("#params"),
        String::from("FLOPs"),
    ];
    for name in &artifact.frame_level.class_names {
        header.push(format!("Sens[{name}]"));
    }
    header.push(String::from("Accuracy"));
    let rows = vec![
        metrics_row("frame", artifact, &artifact.frame_level),
        metrics_row("subject (majority vote)", artifact, &artifact.subject_level),
    ];
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let emit = |cells: &[String], out: &mut String| {
        for (i, cell) in cells.iter().enumerate() {
            out.push_str(&format!("{:<width$}  ", cell, width = widths[i]));
        }
        out.push('\n');
    };
    emit(&header, &mut out);
    for row in &rows {
        emit(row, &mut out);
    }
    let undefined = artifact.frame_level.undefined_classes();
    if !undefined.is_empty() {
        out.push_str(&format!(
            "note: sensitivity undefined for classes absent from the evaluation set: {}\n",
            undefined.join(", ")
        ));
    }
    out.push_str("\nConfusion (rows = truth, frame-level):\n");
    for (name, row) in artifact
        .frame_level
        .class_names
        .iter()
        .zip(&artifact.frame_level.confusion)
    {
        let cells: Vec<String> = row.iter().map(|c| format!("{c:>6}")).collect();
        out.push_str(&format!("{name:>16} {}\n", cells.join(" ")));
    }
    out
}

/// Writes the loss history as comma-separated values with a header row.
pub fn write_history_csv(path: impl AsRef<Path>, history: &[EpochRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("epoch,train_loss,val_loss,val_accuracy\n");
    for rec in history {
        let val_loss = rec.val_loss.map_or(String::new(), |v| format!("{v}"));
        let val_acc = rec.val_accuracy.map_or(String::new(), |v| format!("{v}"));
        out.push_str(&format!(
            "{},{},{},{}\n",
            rec.epoch, rec.train_loss, val_loss, val_acc
        ));
    }
    fs::write(path, out).map_err(|e| AppError::io(path, e))
}
