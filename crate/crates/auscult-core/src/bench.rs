//! Deployment-metric arithmetic: performance, energy, and energy efficiency
//! from model FLOPs, measured latency, and a supplied power reading.
//!
//! The identities are exact: `performance = FLOPs / 1e9 / latency`,
//! `energy = power_W * latency`, `efficiency = performance / power_W`.
//! Wall-clock measurement lives in the companion crate; this module is pure
//! arithmetic so the identities can be verified independently of any timer.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BenchMathError {
    #[error("latency must be positive, got {0}")]
    NonPositiveLatency(f64),
    #[error("power must be positive, got {0} mW")]
    NonPositivePower(f64),
}

/// Derived deployment metrics. Power-dependent fields are present only when
/// a power reading was supplied.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedMetrics {
    pub performance_gflops: f64,
    pub energy_j: Option<f64>,
    pub energy_eff_gflops_per_w: Option<f64>,
}

/// Computes throughput, energy, and efficiency for one inference of
/// `flops` floating-point operations taking `latency_s` seconds at an
/// optional average power draw of `power_mw` milliwatts.
pub fn derive_metrics(
    flops: u64,
    latency_s: f64,
    power_mw: Option<f64>,
) -> Result<DerivedMetrics, BenchMathError> {
    if !(latency_s > 0.0) || !latency_s.is_finite() {
        return Err(BenchMathError::NonPositiveLatency(latency_s));
    }
    let performance_gflops = flops as f64 / 1e9 / latency_s;
    let (energy_j, energy_eff_gflops_per_w) = match power_mw {
        None => (None, None),
        Some(mw) => {
            if !(mw > 0.0) || !mw.is_finite() {
                return Err(BenchMathError::NonPositivePower(mw));
            }
            let watts = mw / 1000.0;
            (Some(watts * latency_s), Some(performance_gflops / watts))
        }
    };
    Ok(DerivedMetrics {
        performance_gflops,
        energy_j,
        energy_eff_gflops_per_w,
    })
}
