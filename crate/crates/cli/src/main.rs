//! `embedkit` — data construction, hard-negative mining, teacher scoring,
//! training, and benchmark evaluation behind one reproducible CLI.
//!
//! Exit codes: 0 on success, 1 for validation errors (bad flags, malformed
//! config or input records), 2 for runtime failures. Every producing run
//! writes `resolved-config.json` (the fully merged settings, byte-stable
//! across reruns) and `run-meta.json` (timestamps) beside its outputs.
//! Configuration precedence: built-in defaults < `--config` file < explicit
//! flags.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "embedkit",
    version,
    about = "Cross-lingual contrastive-distillation toolkit and embedding benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expand NLI data across languages, gate by translation quality, and
    /// build contrastive training instances.
    BuildData(BuildDataArgs),
    /// Mine hard negatives for training instances from a passage corpus.
    Mine(MineArgs),
    /// Attach teacher scores to each instance's candidate group.
    ScoreTeacher(ScoreTeacherArgs),
    /// Train the reference encoder under the contrastive + distillation
    /// objective.
    Train(TrainArgs),
    /// Run a benchmark suite against an encoder and emit reports.
    Evaluate(EvaluateArgs),
    /// Validate a machine-format report and render its text tables.
    Report(ReportArgs),
    /// Run the built-in oracle checks (gradients, loss closed forms,
    /// aggregation fixtures, synthetic suite).
    Selftest(SelftestArgs),
}

#[derive(Args)]
pub struct BuildDataArgs {
    /// NLI examples, one JSON object per line.
    #[arg(long)]
    pub examples: PathBuf,
    /// Translation cache (JSONL); omit for source-language-only runs.
    #[arg(long)]
    pub translations: Option<PathBuf>,
    /// Target languages as comma-separated xxx_Yyyy codes.
    #[arg(long, value_delimiter = ',')]
    pub langs: Vec<String>,
    /// Direction configs to emit (TGT_SRC, SRC_TGT, TGT_TGT, SRC_SRC).
    #[arg(long, value_delimiter = ',')]
    pub configs: Vec<String>,
    /// Minimum translation quality-estimation score kept by the filter.
    #[arg(long)]
    pub qe_threshold: Option<f64>,
    /// JSON file supplying any of the above settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct MineArgs {
    /// Training instances (JSONL).
    #[arg(long)]
    pub instances: PathBuf,
    /// Candidate passage corpus, one passage per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Encoder port-spec (toy:<seed>:<dim>, file:<path>, ckpt:<path>,
    /// marker:<dim>).
    #[arg(long)]
    pub encoder: Option<String>,
    /// Most negatives appended per instance.
    #[arg(long)]
    pub max_negatives: Option<usize>,
    /// Lowest similarity rank eligible for sampling (1-based).
    #[arg(long)]
    pub window_lo: Option<usize>,
    /// Highest similarity rank eligible for sampling (1-based).
    #[arg(long)]
    pub window_hi: Option<usize>,
    /// Sampling seed (instance i uses seed + i).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep corpus passages whose text exactly equals the query.
    #[arg(long)]
    pub keep_exact_duplicates: bool,
    /// Instruction prepended to queries before embedding them.
    #[arg(long)]
    pub query_instruction: Option<String>,
    /// JSON file supplying any of the above settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ScoreTeacherArgs {
    /// Training instances (JSONL).
    #[arg(long)]
    pub instances: PathBuf,
    /// Teacher port-spec (file:<scores.jsonl> or encoder:<encoder-spec>).
    #[arg(long)]
    pub teacher: Option<String>,
    /// JSON file supplying any of the above settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Training instances (JSONL).
    #[arg(long)]
    pub instances: PathBuf,
    /// Encoder embedding width.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Candidates per query (1 positive + G−1 negatives).
    #[arg(long)]
    pub group_size: Option<usize>,
    #[arg(long = "lr", allow_negative_numbers = true)]
    pub learning_rate: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub warmup_ratio: Option<f64>,
    #[arg(long)]
    pub max_query_len: Option<usize>,
    #[arg(long)]
    pub max_passage_len: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub temperature: Option<f64>,
    /// Whether batches may only mix instances from the same dataset.
    #[arg(long)]
    pub same_dataset_within_batch: Option<bool>,
    #[arg(long)]
    pub log_every: Option<usize>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Shuffling and initialization seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Instruction prepended to queries during training.
    #[arg(long)]
    pub query_instruction: Option<String>,
    /// JSON file supplying any TrainConfig fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Built-in suite name (full, lite, lite-synthetic) or a manifest path.
    #[arg(long)]
    pub suite: Option<String>,
    /// Encoder port-spec to evaluate.
    #[arg(long)]
    pub encoder: Option<String>,
    /// Root directory that `path:` dataset sources resolve against.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Seed for synthetic datasets, probe initialization, and clustering.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Row label in the emitted tables; defaults to the encoder spec.
    #[arg(long)]
    pub run_label: Option<String>,
    /// Instruction applied to retrieval and reranking queries.
    #[arg(long)]
    pub query_instruction: Option<String>,
    /// JSON file supplying any of the above settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ReportArgs {
    /// A machine report (report.json) or the directory containing one.
    pub path: PathBuf,
}

#[derive(Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 17)]
    pub seed: u64,
    /// Optional directory for a machine-readable copy of the results.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                // --help and --version are successful outcomes.
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    let outcome = match cli.command {
        Command::BuildData(args) => commands::build_data(&args),
        Command::Mine(args) => commands::mine(&args),
        Command::ScoreTeacher(args) => commands::score_teacher(&args),
        Command::Train(args) => commands::train(&args),
        Command::Evaluate(args) => commands::evaluate(&args),
        Command::Report(args) => commands::report(&args),
        Command::Selftest(args) => commands::selftest(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
