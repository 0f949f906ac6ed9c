//! `fewshot-asd`: generate a synthetic benchmark, train, adapt, score and
//! evaluate.

mod commands;
mod selfcheck;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fewshot_asd::ErrorKind;

pub const SEED_ENV: &str = "FSASD_SEED";

#[derive(Debug, Parser)]
#[command(name = "fewshot-asd", version, about = "Few-shot anomalous sound detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic benchmark (WAV clips and metadata.csv).
    Generate(GenerateArgs),
    /// Meta-train one model per machine and write checkpoints.
    Train(RunArgs),
    /// Fine-tune each checkpoint on the few-shot clips and score test clips.
    AdaptScore(AdaptArgs),
    /// Compute AUROC / pAUROC tables from a scores CSV.
    Evaluate(EvaluateArgs),
    /// Run built-in numerical checks.
    Selfcheck(SelfcheckArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Benchmark spec (TOML); the built-in desk-scale spec when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, required_unless_present = "print_spec")]
    pub out: Option<PathBuf>,
    /// Override the benchmark seed.
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    /// Override the clip length in seconds.
    #[arg(long)]
    pub clip_seconds: Option<f64>,
    /// Print the effective spec and exit.
    #[arg(long)]
    pub print_spec: bool,
}

/// Config file plus flag overrides; flags win.
#[derive(Debug, Args, Clone, Default)]
pub struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Output directory for checkpoints, logs and scores.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Comma-separated machine names.
    #[arg(long, value_delimiter = ',')]
    pub machines: Option<Vec<String>>,
    /// `all`, `section_only`, or comma-separated task names.
    #[arg(long, value_delimiter = ',')]
    pub tasks: Option<Vec<String>>,
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub outer_steps: Option<usize>,
    #[arg(long)]
    pub inner_iters: Option<usize>,
    #[arg(long)]
    pub finetune_iters: Option<usize>,
    #[arg(long)]
    pub epsilon_start: Option<f64>,
    #[arg(long)]
    pub epsilon_end: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Outlier exposure weight.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Disable outlier exposure.
    #[arg(long)]
    pub no_oe: bool,
    /// Print the effective config and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Args)]
pub struct AdaptArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Directory holding `<machine>.ckpt`; the output directory by default.
    #[arg(long)]
    pub checkpoints: Option<PathBuf>,
    /// Scores CSV path; `<output>/scores.csv` by default.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Score with the meta-trained parameters (zero fine-tuning steps).
    #[arg(long)]
    pub no_finetune: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Scores CSV written by adapt-score.
    pub scores: PathBuf,
    /// Report CSV; `report.csv` next to the scores by default.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = fewshot_asd::eval::DEFAULT_MAX_FPR)]
    pub max_fpr: f64,
}

#[derive(Debug, Args)]
pub struct SelfcheckArgs {
    /// Break the ReLU backward rule to prove the gradient check notices.
    #[arg(long, hide = true)]
    pub inject_gradient_fault: bool,
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numeric => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Train(a) => commands::train(&a),
        Command::AdaptScore(a) => commands::adapt_score(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Selfcheck(a) => {
            return if selfcheck::run(a.inject_gradient_fault) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(exit_code(ErrorKind::Numeric))
            };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
