use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use igpo_cli::{commands, CliError, Settings};

/// Desk-scale IGPO / GRPO training on a synthetic multi-hop search task.
#[derive(Parser)]
#[command(name = "igpo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// TOML experiment file; defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a key, `section.key=value` or `key=value` when unambiguous.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one policy and write metrics, checkpoint and KB.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory (overrides `output_dir`).
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Progress line every N steps; 0 silences it.
        #[arg(long, default_value_t = 10)]
        log_every: usize,
    },
    /// Train GRPO and IGPO for each seed and write report.tsv.
    Compare {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 3])]
        seeds: Vec<u64>,
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 25)]
        log_every: usize,
    },
    /// Sample rollouts from a checkpoint, annotated with per-turn gains.
    DumpTraces {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, short, default_value_t = 16)]
        n: usize,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Print a metrics.jsonl file as TSV.
    ExportMetrics { input: PathBuf },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { config, out, log_every } => {
            let settings = Settings::load(config.config.as_deref(), &config.overrides)?;
            commands::train(&settings, out.as_deref(), log_every)?;
        }
        Command::Compare {
            config,
            seeds,
            out,
            log_every,
        } => {
            let settings = Settings::load(config.config.as_deref(), &config.overrides)?;
            commands::compare(&settings, &seeds, out.as_deref(), log_every)?;
        }
        Command::DumpTraces {
            config,
            checkpoint,
            n,
            out,
        } => {
            let settings = Settings::load(config.config.as_deref(), &config.overrides)?;
            commands::dump_traces(&settings, &checkpoint, n, &out)?;
        }
        Command::ExportMetrics { input } => commands::export_metrics(&input, io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("igpo: {e}");
            e.exit_code()
        }
    }
}
