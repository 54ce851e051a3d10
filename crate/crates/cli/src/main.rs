mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::CliError;

/// Reproducible runs of the PCDP and LP-ALT pipelines.
#[derive(Debug, Parser)]
#[command(name = "lifetest", version)]
struct Cli {
    /// Worker threads (0: one per core). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic life-test collection.
    Synth(SynthArgs),
    /// Convert raw CSV tables into the canonical dataset format.
    Ingest(IngestArgs),
    /// Reconstruct PCD from four probe impedances.
    Pcdp {
        #[command(subcommand)]
        verb: Verb<TrainArgs>,
    },
    /// Predict late aging indicators from two early check-ups.
    Lpalt {
        #[command(subcommand)]
        verb: Verb<LpTrainArgs>,
    },
    /// Merge metrics files into one JSON and a flat CSV table.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
enum Verb<T: Args> {
    Train(T),
    Predict(ApplyArgs),
    Evaluate(EvalArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SynthPreset {
    /// 30 devices, five stages; the PCDP scenario.
    Pcdp,
    /// 100 devices at 0 / 1k / 30k cycles; the LP-ALT scenario.
    LifePrediction,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value = "pcdp")]
    preset: SynthPreset,
    /// SynthConfig JSON; replaces the preset. Its seed is overridden.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Adapter config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Directory the config's table paths are relative to (default: the config's directory).
    #[arg(long)]
    base: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitSel {
    Train,
    Test,
    All,
}

impl SplitSel {
    fn name(self) -> &'static str {
        match self {
            SplitSel::Train => "train",
            SplitSel::Test => "test",
            SplitSel::All => "all",
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Dataset manifest.
    #[arg(long)]
    manifest: PathBuf,
    /// Bundle directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Pipeline config JSON; its seed is overridden.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Skip grid search and use default forest parameters.
    #[arg(long)]
    no_grid: bool,
    #[arg(long, value_enum, default_value = "train")]
    split: SplitSel,
}

#[derive(Debug, Args)]
struct LpTrainArgs {
    #[command(flatten)]
    common: TrainArgs,
    /// T1,T2,T3 stage times, e.g. 0,1000,30000.
    #[arg(long, value_delimiter = ',')]
    stages: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct ApplyArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitSel,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    apply: ApplyArgs,
    /// LP-ALT only: full test length in the T3 stage's time unit (default: T3).
    #[arg(long)]
    horizon: Option<f64>,
    /// LP-ALT only: converts cycles to time when stage units differ.
    #[arg(long)]
    seconds_per_cycle: Option<f64>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// metrics.json files to merge.
    #[arg(long = "input", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn run(cli: Cli) -> error::CliResult<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::usage(format!("--threads: {e}")))?;
    }
    let t = cli.threads;
    match cli.cmd {
        Command::Synth(a) => commands::synth(&a, t),
        Command::Ingest(a) => commands::ingest(&a, t),
        Command::Pcdp { verb: Verb::Train(a) } => commands::pcdp_train(&a, t),
        Command::Pcdp { verb: Verb::Predict(a) } => commands::pcdp_predict(&a, t),
        Command::Pcdp { verb: Verb::Evaluate(a) } => commands::pcdp_evaluate(&a, t),
        Command::Lpalt { verb: Verb::Train(a) } => commands::lpalt_train(&a, t),
        Command::Lpalt { verb: Verb::Predict(a) } => commands::lpalt_predict(&a, t),
        Command::Lpalt { verb: Verb::Evaluate(a) } => commands::lpalt_evaluate(&a, t),
        Command::Report(a) => commands::report(&a, t),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return CliError::usage(e.to_string().trim_end()).report(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
