use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use super::config::{ExperimentConfig, TrainConfig};
use super::metrics::{write_metrics, MetricsHeader, RunSummary, StepMetrics};
use super::step::{train_step, Environment, TrainState};
use super::warmstart::warm_start;
use crate::error::{IgpoError, Result};
use crate::objective::Algorithm;
use crate::policy::{checkpoint, PolicyParams};

/// Environment and warm-started weights; shared by every arm run with the
/// same seed.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub env: Environment,
    pub initial: PolicyParams,
    pub warmup_losses: Vec<f64>,
}

pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    config.validate()?;
    let env = Environment::new(&config.environment, config.policy.vocab_size)?;
    let mut initial = PolicyParams::init(config.policy.shape(), config.train.seed, config.policy.init_scale);
    let warmup_losses = warm_start(&mut initial, &env.kb, env.hops, &config.warmup, config.train.seed)?;
    Ok(Prepared {
        env,
        initial,
        warmup_losses,
    })
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub label: String,
    pub metrics: Vec<StepMetrics>,
    pub params: PolicyParams,
    pub summary: RunSummary,
}

/// `IGPO/F1+IG seed=1` style label.
pub fn run_label(config: &TrainConfig) -> String {
    match config.algorithm {
        Algorithm::Grpo => format!("GRPO seed={}", config.seed),
        Algorithm::Igpo => format!("IGPO/{} seed={}", config.reward_mode, config.seed),
    }
}

/// Trains from `prepared.initial` for `config.total_steps`, calling
/// `on_step` after each step.
pub fn run_prepared(
    prepared: &Prepared,
    config: &TrainConfig,
    mut on_step: impl FnMut(&StepMetrics),
) -> Result<RunResult> {
    config.validate()?;
    let mut state = TrainState::new(prepared.initial.clone());
    let mut metrics = Vec::with_capacity(config.total_steps);
    for _ in 0..config.total_steps {
        let m = train_step(&mut state, &prepared.env, config)?;
        on_step(&m);
        metrics.push(m);
    }
    Ok(RunResult {
        label: run_label(config),
        summary: RunSummary::from_metrics(&metrics),
        metrics,
        params: state.params,
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunResult> {
    run_prepared(&prepare(config)?, &config.train, |_| {})
}

/// Writes `metrics.jsonl`, `policy.ckpt` and `kb.txt` under `dir`.
pub fn write_run(dir: &Path, prepared: &Prepared, result: &RunResult) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| IgpoError::io(dir, e))?;
    let path = dir.join("metrics.jsonl");
    let file = File::create(&path).map_err(|e| IgpoError::io(&path, e))?;
    write_metrics(
        BufWriter::new(file),
        &MetricsHeader::new(&result.label),
        &result.metrics,
    )
    .map_err(|e| IgpoError::io(&path, e))?;
    checkpoint::save(&dir.join("policy.ckpt"), &result.params)?;
    let path = dir.join("kb.txt");
    let file = File::create(&path).map_err(|e| IgpoError::io(&path, e))?;
    prepared
        .env
        .kb
        .export(BufWriter::new(file))
        .map_err(|e| IgpoError::io(&path, e))?;
    Ok(())
}
