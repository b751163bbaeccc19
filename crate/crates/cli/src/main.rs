mod commands;
mod config;
mod evaluate;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Environment variable naming the default name-bank directory.
pub const DATA_DIR_ENV: &str = "RENAMEBENCH_DATA_DIR";

/// Bad invocation or configuration; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(
    name = "renamebench",
    version,
    about = "Entity-renaming robustness audits for reading comprehension"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Errors only.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate seeded perturbed test sets.
    Perturb(PerturbArgs),
    /// Score prediction files under the average-case protocol.
    Evaluate(EvaluateArgs),
    /// Write or read back manual quality-check sheets.
    #[command(subcommand)]
    Audit(AuditCommand),
    /// Select mask positions for a JSONL token corpus.
    Mask(MaskArgs),
    /// Domain-shift and name-bias reports.
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Write lexical-overlap baseline predictions for a dataset.
    Predict(PredictArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Auto,
    Mrqa,
    Plain,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    /// TOML config; flags take precedence over its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// PER, ORG, GPE, MIX or a list such as PER,GPE.
    #[arg(long)]
    pub types: Option<String>,
    /// indistname, dbname or randstr.
    #[arg(long)]
    pub source: Option<String>,
    /// Name-bank directory (falls back to the config, then $RENAMEBENCH_DATA_DIR).
    #[arg(long)]
    pub name_bank: Option<PathBuf>,
    /// JSONL entity annotations; without it the builtin gazetteer tagger runs.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long)]
    pub n_seeds: Option<usize>,
    #[arg(long)]
    pub base_seed: Option<u64>,
    #[arg(long = "out")]
    pub output_dir: Option<PathBuf>,
    /// Output file prefix (default: dataset file name).
    #[arg(long)]
    pub stem: Option<String>,
    /// Largest tolerated fraction of failing instances.
    #[arg(long)]
    pub failure_budget: Option<f64>,
    /// Also write span-transfer oracle predictions per seed.
    #[arg(long)]
    pub emit_oracle: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Dataset files of one condition, one per perturbation seed.
    #[arg(long, required = true, num_args = 1..)]
    pub data: Vec<PathBuf>,
    /// Prediction directories, one per training run; `X.jsonl` is scored
    /// against `DIR/X.json`.
    #[arg(long, required = true, num_args = 1..)]
    pub predictions: Vec<PathBuf>,
    /// Prediction directories of a second system for a paired significance test.
    #[arg(long, num_args = 1..)]
    pub compare: Vec<PathBuf>,
    /// Directory for evaluation.json and evaluation.tsv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = renamebench::evaluator::DEFAULT_RESAMPLES)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum AuditCommand {
    /// Sample k instances per entity type into TSV and Markdown sheets.
    Sample(AuditSampleArgs),
    /// Accuracy percentages from filled TSV sheets.
    Summarize(AuditSummarizeArgs),
}

#[derive(Debug, Args)]
pub struct AuditSampleArgs {
    /// The unperturbed dataset.
    #[arg(long)]
    pub base: PathBuf,
    /// One perturbed seed file written by `perturb`.
    #[arg(long)]
    pub perturbed: PathBuf,
    /// Plan file (default: next to the perturbed file).
    #[arg(long)]
    pub plans: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    pub k: usize,
    #[arg(long, default_value = "MIX")]
    pub types: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AuditSummarizeArgs {
    #[arg(required = true)]
    pub sheets: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Vanilla,
    WholeWord,
    Span,
    Entity,
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    /// Fraction of tokens to mask.
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub geometric_p: Option<f64>,
    #[arg(long)]
    pub max_span: Option<usize>,
    #[arg(long)]
    pub entity_prob: Option<f64>,
    /// Choose entity-or-span once per sequence.
    #[arg(long)]
    pub per_sequence: bool,
}

#[derive(Debug, Subcommand)]
pub enum StatsCommand {
    /// Share of test entity tokens never seen in training data.
    DomainShift(DomainShiftArgs),
    /// EM of the most and least polarized or popular names.
    Bias(BiasArgs),
}

#[derive(Debug, Args)]
pub struct DomainShiftArgs {
    /// Metadata files (`*.meta.jsonl`) written by `perturb`.
    #[arg(long, required = true, num_args = 1..)]
    pub test_meta: Vec<PathBuf>,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub train_format: FormatArg,
    /// Entity annotations for the training set.
    #[arg(long)]
    pub train_annotations: Option<PathBuf>,
    #[arg(long)]
    pub name_bank: Option<PathBuf>,
    #[arg(long, default_value = "MIX")]
    pub types: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BiasArgs {
    /// JSON object mapping first names to EM.
    #[arg(long)]
    pub per_name_em: PathBuf,
    #[arg(long)]
    pub name_bank: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub format: FormatArg,
    #[arg(long)]
    pub out: PathBuf,
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .init();
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(UsageError("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()?;
    }
    match cli.command {
        Command::Perturb(a) => commands::perturb(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::Audit(AuditCommand::Sample(a)) => commands::audit_sample(a),
        Command::Audit(AuditCommand::Summarize(a)) => commands::audit_summarize(a),
        Command::Mask(a) => commands::mask(a),
        Command::Stats(StatsCommand::DomainShift(a)) => commands::domain_shift(a),
        Command::Stats(StatsCommand::Bias(a)) => commands::bias(a),
        Command::Predict(a) => commands::predict(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose, cli.quiet);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
