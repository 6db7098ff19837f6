use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use igpo_core::environment::run_episode;
use igpo_core::episodes::trace::{write_traces, TraceRecord};
use igpo_core::objective::Algorithm;
use igpo_core::policy::checkpoint;
use igpo_core::rewards::{gt_probs_by_turn, info_gains_from_probs};
use igpo_core::trainer::{
    prepare, read_metrics, run_prepared, stream_rng, write_run, Environment, StepMetrics, TrainConfig,
};
use igpo_core::IgpoError;

use crate::error::CliError;
use crate::report::{build_report, ArmRun};
use crate::settings::Settings;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn progress(label: &str, every: usize, total: usize) -> impl FnMut(&StepMetrics) + '_ {
    move |m| {
        let done = m.step + 1;
        if every > 0 && (done % every == 0 || done == total) {
            eprintln!(
                "[{label}] step {done}/{total} success {:.3} zero-adv {:.3} tokens {}",
                m.success_rate, m.zero_advantage_fraction, m.cumulative_decision_tokens
            );
        }
    }
}

/// `train`: one run into `out` (or the settings' `output_dir`).
pub fn train(settings: &Settings, out: Option<&Path>, log_every: usize) -> Result<PathBuf, CliError> {
    let dir = out.map_or_else(|| settings.output_dir.clone(), Path::to_path_buf);
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    write_text(&dir.join("config.toml"), &settings.to_toml())?;
    let config = settings.config();
    let prepared = prepare(&config)?;
    let result = run_prepared(
        &prepared,
        &config.train,
        progress(&settings.label, log_every, config.train.total_steps),
    )?;
    write_run(&dir, &prepared, &result)?;
    eprintln!(
        "[{}] final success {:.3}, wrote {}",
        settings.label,
        result.summary.final_success,
        dir.display()
    );
    Ok(dir)
}

pub const REPORT_FILE: &str = "report.tsv";

/// `compare`: GRPO and IGPO per seed from the same warm start, then a
/// report computed from the written metric files.
pub fn compare(settings: &Settings, seeds: &[u64], out: Option<&Path>, log_every: usize) -> Result<PathBuf, CliError> {
    if seeds.is_empty() {
        return Err(CliError::Config("`--seeds` needs at least one seed".into()));
    }
    let dir = out.map_or_else(|| settings.output_dir.clone(), Path::to_path_buf);
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    write_text(&dir.join("config.toml"), &settings.to_toml())?;
    let mut arms = Vec::new();
    for &seed in seeds {
        let mut config = settings.config();
        config.train.seed = seed;
        let prepared = prepare(&config)?;
        for algorithm in [Algorithm::Grpo, Algorithm::Igpo] {
            let train = TrainConfig {
                algorithm,
                ..config.train.clone()
            };
            let label = format!("{algorithm} seed={seed}");
            let result = run_prepared(&prepared, &train, progress(&label, log_every, train.total_steps))?;
            let run_dir = dir
                .join(format!("seed-{seed}"))
                .join(algorithm.as_str().to_ascii_lowercase());
            write_run(&run_dir, &prepared, &result)?;
            arms.push(ArmRun {
                seed,
                algorithm,
                metrics_path: run_dir.join("metrics.jsonl"),
            });
        }
    }
    let report = build_report(&arms)?;
    let path = dir.join(REPORT_FILE);
    write_text(&path, &report)?;
    print!("{report}");
    Ok(path)
}

/// `dump-traces`: `n` rollouts of a checkpointed policy with per-turn
/// information gains.
pub fn dump_traces(settings: &Settings, checkpoint_path: &Path, n: usize, out: &Path) -> Result<(), CliError> {
    let params = checkpoint::load(checkpoint_path).map_err(|e| match e {
        IgpoError::Io { .. } | IgpoError::Format { .. } => CliError::Config(e.to_string()),
        other => other.into(),
    })?;
    let config = settings.config();
    if params.shape().vocab != config.policy.vocab_size {
        return Err(CliError::Config(format!(
            "`policy.vocab_size` is {} but the checkpoint has vocabulary {}",
            config.policy.vocab_size,
            params.shape().vocab
        )));
    }
    let env = Environment::new(&config.environment, config.policy.vocab_size)?;
    let episode = config.train.episode(env.max_answer_tokens);
    let tasks = if n == 0 {
        Vec::new()
    } else {
        env.tasks_for_step(config.train.seed, usize::MAX, n)?
    };
    let records: Vec<TraceRecord> = tasks
        .iter()
        .enumerate()
        .map(|(i, task)| {
            let mut rng = stream_rng(config.train.seed, u64::MAX, 0, i as u64);
            let rollout = run_episode(&params, &env.kb, task, &episode, &mut rng);
            let wrapped = igpo_core::episodes::wrap_ground_truth(&task.gt_answer);
            let probs = gt_probs_by_turn(&params, &task.question, &rollout, &wrapped);
            let mut record = TraceRecord::from_rollout(&rollout);
            record.question = task.question.clone();
            record.ground_truth = task.gt_answer.clone();
            record.info_gains = Some(info_gains_from_probs(&probs));
            record
        })
        .collect();
    let file = File::create(out).map_err(|e| io_err(out, e))?;
    write_traces(BufWriter::new(file), env.kb.vocab(), &records).map_err(|e| io_err(out, e))?;
    eprintln!("wrote {} traces to {}", records.len(), out.display());
    Ok(())
}

/// `export-metrics`: a metrics stream as a tab-separated table.
pub fn export_metrics(input: &Path, mut out: impl Write) -> Result<(), CliError> {
    let file = File::open(input).map_err(|e| CliError::Config(format!("{}: {e}", input.display())))?;
    let (header, metrics) = read_metrics(BufReader::new(file)).map_err(|e| CliError::Config(e.to_string()))?;
    let write = |out: &mut dyn Write| -> std::io::Result<()> {
        writeln!(out, "# {} v{} {}", header.format, header.version, header.label)?;
        writeln!(
            out,
            "step\tsuccess_rate\tmean_outcome_reward\tformat_valid_rate\tmean_turns\tzero_advantage_fraction\tgt_entropy_reduction\tdecision_tokens\tcumulative_decision_tokens\tobjective\tmean_kl\tclip_fraction\tgrad_norm"
        )?;
        for m in &metrics {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                m.step,
                m.success_rate,
                m.mean_outcome_reward,
                m.format_valid_rate,
                m.mean_turns,
                m.zero_advantage_fraction,
                m.gt_entropy_reduction.map_or(String::new(), |x| x.to_string()),
                m.decision_tokens,
                m.cumulative_decision_tokens,
                m.objective,
                m.mean_kl,
                m.clip_fraction,
                m.grad_norm
            )?;
        }
        out.flush()
    };
    match write(&mut out) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Runtime(format!("writing table: {e}"))),
        _ => Ok(()),
    }
}
