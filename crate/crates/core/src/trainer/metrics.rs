use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{IgpoError, Result};

pub const METRICS_FORMAT: &str = "igpo-metrics";
pub const METRICS_VERSION: u32 = 1;

/// Share of trailing steps averaged into "final" summary values.
pub const FINAL_FRACTION: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub rollouts: usize,
    pub mean_outcome_reward: f64,
    /// Exact-match accuracy of the sampled answers.
    pub success_rate: f64,
    pub format_valid_rate: f64,
    pub mean_turns: f64,
    /// Groups whose advantages vanish entirely.
    pub zero_advantage_fraction: f64,
    /// Mean `H(p_0) − H(p_{T−1})` over rollouts with at least two turns.
    pub gt_entropy_reduction: Option<f64>,
    pub decision_tokens: u64,
    pub cumulative_decision_tokens: u64,
    pub objective: f64,
    pub mean_kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsHeader {
    pub format: String,
    pub version: u32,
    /// Free-form run label, e.g. `IGPO/F1+IG seed=1`.
    pub label: String,
}

impl MetricsHeader {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            format: METRICS_FORMAT.into(),
            version: METRICS_VERSION,
            label: label.into(),
        }
    }
}

/// Header line followed by one JSON object per step.
pub fn write_metrics<W: Write>(mut out: W, header: &MetricsHeader, metrics: &[StepMetrics]) -> std::io::Result<()> {
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for m in metrics {
        serde_json::to_writer(&mut out, m)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_metrics<R: BufRead>(input: R) -> Result<(MetricsHeader, Vec<StepMetrics>)> {
    let mut lines = input
        .lines()
        .enumerate()
        .filter(|(_, l)| !matches!(l, Ok(l) if l.trim().is_empty()));
    let bad = |line: usize, e: &dyn std::fmt::Display| IgpoError::format("metrics", format!("line {}: {e}", line + 1));
    let (n, first) = lines.next().ok_or_else(|| IgpoError::format("metrics", "empty file"))?;
    let first = first.map_err(|e| bad(n, &e))?;
    let header: MetricsHeader = serde_json::from_str(&first).map_err(|e| bad(n, &e))?;
    if header.format != METRICS_FORMAT {
        return Err(IgpoError::format(
            "metrics",
            format!("unexpected format `{}`", header.format),
        ));
    }
    if header.version != METRICS_VERSION {
        return Err(IgpoError::format(
            "metrics",
            format!("unsupported version {}", header.version),
        ));
    }
    let mut metrics = Vec::new();
    for (n, line) in lines {
        let line = line.map_err(|e| bad(n, &e))?;
        metrics.push(serde_json::from_str(&line).map_err(|e| bad(n, &e))?);
    }
    Ok((header, metrics))
}

/// Number of trailing steps in the "final" window of an `n`-step run.
pub fn final_window(n: usize) -> usize {
    ((n as f64 * FINAL_FRACTION).ceil() as usize).clamp(1, n.max(1))
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Whole-run figures derived from a metric series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    /// Mean success rate over the final window.
    pub final_success: f64,
    pub final_outcome_reward: f64,
    /// Mean entropy reduction over the final window.
    pub final_entropy_reduction: Option<f64>,
    /// Mean over all steps.
    pub mean_zero_advantage_fraction: f64,
    pub total_decision_tokens: u64,
    /// Successful rollouts per decision token over the whole run.
    pub success_per_token: f64,
}

impl RunSummary {
    pub fn from_metrics(metrics: &[StepMetrics]) -> Self {
        let tail = &metrics[metrics.len() - final_window(metrics.len()).min(metrics.len())..];
        let total = metrics.last().map_or(0, |m| m.cumulative_decision_tokens);
        let successes: f64 = metrics.iter().map(|m| m.success_rate * m.rollouts as f64).sum();
        Self {
            steps: metrics.len(),
            final_success: mean(tail.iter().map(|m| m.success_rate)).unwrap_or(0.0),
            final_outcome_reward: mean(tail.iter().map(|m| m.mean_outcome_reward)).unwrap_or(0.0),
            final_entropy_reduction: mean(tail.iter().filter_map(|m| m.gt_entropy_reduction)),
            mean_zero_advantage_fraction: mean(metrics.iter().map(|m| m.zero_advantage_fraction)).unwrap_or(0.0),
            total_decision_tokens: total,
            success_per_token: if total == 0 { 0.0 } else { successes / total as f64 },
        }
    }

    /// Trailing-window mean success at every step, using the same window
    /// length as the final figures.
    pub fn smoothed_success(metrics: &[StepMetrics]) -> Vec<f64> {
        let w = final_window(metrics.len());
        (0..metrics.len())
            .map(|i| {
                let lo = (i + 1).saturating_sub(w);
                mean(metrics[lo..=i].iter().map(|m| m.success_rate)).unwrap()
            })
            .collect()
    }

    /// Cumulative decision tokens at the first step whose smoothed success
    /// reaches `target`.
    pub fn tokens_to_reach(metrics: &[StepMetrics], target: f64) -> Option<u64> {
        Self::smoothed_success(metrics)
            .iter()
            .position(|&s| s >= target)
            .map(|i| metrics[i].cumulative_decision_tokens)
    }
}
