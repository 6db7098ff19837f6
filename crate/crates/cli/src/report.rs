//! The comparison table written by `compare`.
//!
//! Every number is recomputed from the run's `metrics.jsonl`, so the report
//! can be regenerated (and checked) from the run directories alone.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use igpo_core::objective::Algorithm;
use igpo_core::trainer::{read_metrics, RunSummary};

use crate::error::CliError;

pub const REPORT_FORMAT: &str = "igpo-report";
pub const REPORT_VERSION: u32 = 1;

pub const COLUMNS: [&str; 7] = [
    "seed",
    "arm",
    "final_success",
    "mean_zero_advantage_fraction",
    "final_entropy_reduction",
    "success_per_token",
    "total_decision_tokens",
];

#[derive(Clone, Debug)]
pub struct ArmRun {
    pub seed: u64,
    pub algorithm: Algorithm,
    pub metrics_path: PathBuf,
}

pub fn load_summary(path: &std::path::Path) -> Result<RunSummary, CliError> {
    let file = File::open(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let (_, metrics) = read_metrics(BufReader::new(file)).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(RunSummary::from_metrics(&metrics))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

fn row(seed: &str, arm: Algorithm, s: &RunSummary) -> String {
    format!(
        "{seed}\t{arm}\t{:.6}\t{:.6}\t{}\t{:.9}\t{}",
        s.final_success,
        s.mean_zero_advantage_fraction,
        fmt_opt(s.final_entropy_reduction),
        s.success_per_token,
        s.total_decision_tokens
    )
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    })
}

/// One row per run in the given order. With two or more seeds, a `median`
/// row per arm follows.
pub fn build_report(runs: &[ArmRun]) -> Result<String, CliError> {
    let mut out = format!("# {REPORT_FORMAT} v{REPORT_VERSION}\n{}\n", COLUMNS.join("\t"));
    let mut loaded = Vec::with_capacity(runs.len());
    for run in runs {
        let summary = load_summary(&run.metrics_path)?;
        out.push_str(&row(&run.seed.to_string(), run.algorithm, &summary));
        out.push('\n');
        loaded.push((run.algorithm, summary));
    }
    let mut seeds: Vec<u64> = runs.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    if seeds.len() >= 2 {
        for arm in [Algorithm::Grpo, Algorithm::Igpo] {
            let of_arm: Vec<&RunSummary> = loaded.iter().filter(|(a, _)| *a == arm).map(|(_, s)| s).collect();
            if of_arm.is_empty() {
                continue;
            }
            let pick = |f: fn(&RunSummary) -> f64| median(of_arm.iter().map(|s| f(s)).collect()).unwrap_or(0.0);
            let entropy = median(of_arm.iter().filter_map(|s| s.final_entropy_reduction).collect());
            let summary = RunSummary {
                steps: 0,
                final_success: pick(|s| s.final_success),
                final_outcome_reward: pick(|s| s.final_outcome_reward),
                final_entropy_reduction: entropy,
                mean_zero_advantage_fraction: pick(|s| s.mean_zero_advantage_fraction),
                total_decision_tokens: pick(|s| s.total_decision_tokens as f64).round() as u64,
                success_per_token: pick(|s| s.success_per_token),
            };
            out.push_str(&row("median", arm, &summary));
            out.push('\n');
        }
    }
    Ok(out)
}
