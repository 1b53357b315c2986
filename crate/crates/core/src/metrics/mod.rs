//! Ranking and calibration metrics plus parameter, FLOP and latency accounting.

mod auc;
mod count;
mod flops;
mod latency;

pub use auc::{auc, logloss, sigmoid, PROB_CLIP};
pub use count::{count_params, walk_params, ParamCounts};
pub use flops::{count_flops, count_ops, instrumented_flops, Counted, OpCounts};
pub use latency::{bench_latency, LatencyStats, DEFAULT_BENCH_ITERATIONS};

use serde::{Deserialize, Serialize};

use crate::data::Instance;
use crate::error::Result;
use crate::model::Model;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub auc: f64,
    pub logloss: f64,
}

/// AUC and logloss of a model's predictions on labelled instances.
pub fn evaluate(model: &Model, instances: &[Instance]) -> Result<EvalMetrics> {
    evaluate_sharded(model, instances, 1)
}

/// As [`evaluate`], sharding the forward passes over `threads` workers.
pub fn evaluate_sharded(model: &Model, instances: &[Instance], threads: usize) -> Result<EvalMetrics> {
    let logits = model.logits_sharded(instances, threads)?;
    metrics_from_logits(instances, &logits)
}

pub fn metrics_from_logits(instances: &[Instance], logits: &[f64]) -> Result<EvalMetrics> {
    let labels: Vec<f64> = instances.iter().map(|i| f64::from(i.label)).collect();
    let probs: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
    Ok(EvalMetrics {
        auc: auc(&labels, logits)?,
        logloss: logloss(&labels, &probs)?,
    })
}

/// Efficiency columns for one model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub params: ParamCounts,
    pub flops: u64,
    pub latency_us: Option<LatencyStats>,
}

pub fn efficiency(model: &Model, latency_iterations: Option<usize>) -> Result<EfficiencyReport> {
    Ok(EfficiencyReport {
        params: count_params(model.spec(), model.field_rows())?,
        flops: model.flops(),
        latency_us: latency_iterations.map(|n| bench_latency(model, n)).transpose()?,
    })
}
