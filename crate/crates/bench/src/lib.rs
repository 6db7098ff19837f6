//! Shared fixtures for the benchmarks.

use igpo_core::environment::Task;
use igpo_core::trainer::{prepare, ExperimentConfig, Prepared, WarmupConfig};

/// Default-sized experiment with a short warm start, so the policy emits
/// multi-turn rollouts without the full warm-up cost.
pub fn bench_config() -> ExperimentConfig {
    ExperimentConfig {
        warmup: WarmupConfig {
            steps: 200,
            ..WarmupConfig::default()
        },
        ..ExperimentConfig::default()
    }
}

pub struct Fixture {
    pub config: ExperimentConfig,
    pub prepared: Prepared,
    pub tasks: Vec<Task>,
}

pub fn fixture() -> Fixture {
    let config = bench_config();
    let prepared = prepare(&config).expect("default config prepares");
    let tasks = prepared
        .env
        .tasks_for_step(config.train.seed, 0, config.train.batch_size)
        .expect("tasks");
    Fixture {
        config,
        prepared,
        tasks,
    }
}
