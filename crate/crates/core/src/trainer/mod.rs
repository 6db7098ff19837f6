//! Training loop: warm start, one optimization step per batch of groups,
//! per-step metrics and whole-run orchestration.

mod config;
mod experiment;
mod metrics;
mod seeding;
mod step;
pub mod warmstart;

pub use config::{EnvConfig, ExperimentConfig, PolicyConfig, TrainConfig, WarmupAnswer, WarmupConfig};
pub use experiment::{prepare, run_experiment, run_label, run_prepared, write_run, Prepared, RunResult};
pub use metrics::{
    final_window, read_metrics, write_metrics, MetricsHeader, RunSummary, StepMetrics, FINAL_FRACTION, METRICS_FORMAT,
    METRICS_VERSION,
};
pub use seeding::stream_rng;
pub use step::{
    compute_fields, gt_entropy_reduction, sample_groups, train_step, zero_advantage_fraction, Environment,
    GroupEvaluation, TrainState,
};

#[cfg(test)]
mod tests;
