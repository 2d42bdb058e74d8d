//! Single-frame inference latency measurement and deployment reports.
//!
//! Latency is wall-clock time of one batch-1 forward pass, measured after a
//! warmup; the median over the measured runs is the headline statistic and
//! the raw samples stay in the report for inspection. Power is ingested (a
//! flag or a sensor file holding integer milliwatts), never measured here.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use auscult_core::bench::{derive_metrics, DerivedMetrics};

use crate::error::{AppError, Result};

/// Benchmark settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Configuration label carried into the report (e.g. a CPU name and
    /// frequency).
    pub label: String,
    pub warmup_runs: usize,
    pub measured_runs: usize,
    /// Average power draw in milliwatts, when known.
    pub power_mw: Option<f64>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            label: String::from("unlabeled"),
            warmup_runs: 5,
            measured_runs: 30,
            power_mw: None,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.measured_runs < 10 {
            return Err(AppError::Usage(format!(
                "measured_runs must be at least 10 for a reported median, got {}",
                self.measured_runs
            )));
        }
        if let Some(mw) = self.power_mw {
            if !(mw > 0.0) {
                return Err(AppError::Usage(format!("power must be positive, got {mw} mW")));
            }
        }
        Ok(())
    }
}

/// Latency statistics over the measured runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    /// Raw per-run wall-clock seconds, in measurement order.
    pub samples_s: Vec<f64>,
    pub median_s: f64,
    pub min_s: f64,
    pub max_s: f64,
    /// Estimated timer resolution in seconds.
    pub timer_resolution_s: f64,
    /// Set when the timer resolution exceeds 1% of the median latency.
    pub timer_warning: bool,
}

fn estimate_timer_resolution() -> f64 {
    let mut best = f64::INFINITY;
    for _ in 0..4096 {
        let a = Instant::now();
        let b = Instant::now();
        let d = (b - a).as_secs_f64();
        if d > 0.0 && d < best {
            best = d;
        }
    }
    if best.is_finite() {
        best
    } else {
        1e-9
    }
}

/// Times `run` once per measured run after `warmup_runs` untimed calls.
/// The measurement covers only the call itself, not input preparation.
pub fn measure_latency(cfg: &BenchConfig, mut run: impl FnMut()) -> Result<LatencyStats> {
    cfg.validate()?;
    for _ in 0..cfg.warmup_runs {
        run();
    }
    let mut samples_s = Vec::with_capacity(cfg.measured_runs);
    for _ in 0..cfg.measured_runs {
        let start = Instant::now();
        run();
        samples_s.push(start.elapsed().as_secs_f64());
    }
    let mut sorted = samples_s.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite latencies"));
    let median_s = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    let timer_resolution_s = estimate_timer_resolution();
    Ok(LatencyStats {
        min_s: sorted[0],
        max_s: sorted[sorted.len() - 1],
        timer_warning: timer_resolution_s > 0.01 * median_s,
        median_s,
        samples_s,
        timer_resolution_s,
    })
}

/// One benchmark result, mirroring the deployment-table columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub label: String,
    pub power_mw: Option<f64>,
    pub latency: LatencyStats,
    pub model_flops: u64,
    /// The FLOP counting rule the `model_flops` figure uses.
    pub convention: String,
    pub metrics: DerivedMetrics,
}

impl BenchReport {
    pub fn new(
        label: String,
        latency: LatencyStats,
        model_flops: u64,
        convention: String,
        power_mw: Option<f64>,
    ) -> Result<Self> {
        let metrics = derive_metrics(model_flops, latency.median_s, power_mw)?;
        Ok(Self {
            label,
            power_mw,
            latency,
            model_flops,
            convention,
            metrics,
        })
    }
}

/// Formats `x` with three significant figures.
pub fn format_sig3(x: f64) -> String {
    if x == 0.0 {
        return String::from("0.00");
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (2 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

fn opt_sig3(v: Option<f64>) -> String {
    v.map_or_else(|| String::from("-"), format_sig3)
}

/// Plain-text table in deployment-report column order.
pub fn emit_table(reports: &[BenchReport]) -> Result<String> {
    if reports.is_empty() {
        return Err(AppError::Usage("no benchmark reports to print".into()));
    }
    let header = [
        "Configuration",
        "Power (mW)",
        "Latency (S)",
        "Performance (GFLOP/S)",
        "Energy (J)",
        "Energy Eff (GFLOPS/W)",
    ];
    let mut rows: Vec<[String; 6]> = Vec::with_capacity(reports.len());
    for r in reports {
        rows.push([
            r.label.clone(),
            opt_sig3(r.power_mw),
            format_sig3(r.latency.median_s),
            format_sig3(r.metrics.performance_gflops),
            opt_sig3(r.metrics.energy_j),
            opt_sig3(r.metrics.energy_eff_gflops_per_w),
        ]);
    }
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    for (i, h) in header.iter().enumerate() {
        out.push_str(&format!("{:<width$}  ", h, width = widths[i]));
    }
    out.push('\n');
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            out.push_str(&format!("{:<width$}  ", cell, width = widths[i]));
        }
        out.push('\n');
    }
    let mut notes = Vec::new();
    for r in reports {
        if r.latency.timer_warning {
            notes.push(format!(
                "note: timer resolution {} s exceeds 1% of the median latency for '{}'",
                format_sig3(r.latency.timer_resolution_s),
                r.label
            ));
        }
    }
    notes.push(format!("FLOP convention: {}", reports[0].convention));
    for n in notes {
        out.push_str(&n);
        out.push('\n');
    }
    Ok(out)
}

/// Structured report output; `from_json` recovers the exact values.
pub fn to_json(reports: &[BenchReport]) -> Result<String> {
    serde_json::to_string_pretty(reports)
        .map_err(|e| AppError::Usage(format!("serializing bench report: {e}")))
}

pub fn from_json(text: &str) -> Result<Vec<BenchReport>> {
    serde_json::from_str(text).map_err(|e| AppError::Usage(format!("parsing bench report: {e}")))
}

/// Reads a power-sensor file: one line holding integer milliwatts.
pub fn read_power_sensor(path: impl AsRef<Path>) -> Result<f64> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let line = text.trim();
    let mw: i64 = line
        .parse()
        .map_err(|_| AppError::parse(path, 1, format!("expected integer milliwatts, got '{line}'")))?;
    if mw <= 0 {
        return Err(AppError::parse(path, 1, format!("power must be positive, got {mw}")));
    }
    Ok(mw as f64)
}
