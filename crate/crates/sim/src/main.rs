use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use gfra_sim::output::{write_metrics, write_metrics_file};
use gfra_sim::{run_experiment, Algorithm, ExperimentConfig, Preset, RunOptions};

/// Grant-free random access channel-estimation experiments.
#[derive(Parser)]
#[command(name = "gfra", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded experiment and write one CSV row per (algorithm, SNR).
    Run(RunArgs),
    /// Print the fully resolved configuration as TOML.
    ShowConfig(ConfigArgs),
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// TOML file; its keys override the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "desk")]
    preset: Preset,
}

#[derive(clap::Args)]
struct RunArgs {
    #[command(flatten)]
    base: ConfigArgs,
    /// Comma-separated SNR list in dB.
    #[arg(long, value_delimiter = ',')]
    snr: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of mvsp, em_mvsp, omp, sbl.
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<Algorithm>>,
    #[arg(long)]
    trials: Option<usize>,
    /// Directory for per-run trace CSVs and dumps of A.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
}

fn load(args: &ConfigArgs) -> anyhow::Result<ExperimentConfig> {
    Ok(match &args.config {
        Some(path) => ExperimentConfig::from_file(path, args.preset)?,
        None => ExperimentConfig::preset(args.preset),
    })
}

fn threads() -> anyhow::Result<Option<usize>> {
    match std::env::var("GFRA_THREADS") {
        Ok(v) => {
            let n: usize = v.parse().with_context(|| format!("GFRA_THREADS={v} is not a count"))?;
            if n == 0 {
                bail!("GFRA_THREADS must be >= 1");
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let mut cfg = load(&args.base)?;
    if let Some(snr) = args.snr {
        cfg.experiment.snr_db = snr;
    }
    if let Some(seed) = args.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(algs) = args.algorithms {
        cfg.experiment.algorithms = algs;
    }
    if let Some(trials) = args.trials {
        cfg.experiment.trials = trials;
    }
    cfg.validate()?;
    let options = RunOptions {
        trace_dir: args.trace_dir,
        threads: threads()?,
    };
    let result = run_experiment(&cfg, &options)?;
    if result.domain_violations > 0 {
        log::warn!("{} probability/variance domain violations", result.domain_violations);
    }
    if !result.aborts.is_empty() {
        log::warn!("{} trial runs aborted", result.aborts.len());
    }
    match args.out {
        Some(path) => write_metrics_file(&path, &result.records)?,
        None => {
            let stdout = std::io::stdout();
            write_metrics(stdout.lock(), &result.records)?;
        }
    }
    if result.records.is_empty() {
        bail!("every trial aborted");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::ShowConfig(args) => load(&args).map(|cfg| {
            let _ = std::io::stdout().write_all(cfg.to_toml_string().as_bytes());
        }),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
