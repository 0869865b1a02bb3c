//! `expertise`: generate, extract, select, train, evaluate, classify and
//! monitor from the command line.
//!
//! Every flag can also come from a `--config` file of `key = value` lines;
//! values from the file override flags given on the command line.

mod commands;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use expertise_core::eval::{Balance, SelectionMode};

pub const OUT_DIR_ENV: &str = "EXPERTISE_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "expertise",
    version,
    about = "Novice/Expert classification of spoken dialog system users"
)]
#[command(args_override_self = true)]
pub struct Cli {
    /// Report format for commands that print results.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// File of `key = value` lines overriding command-line flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic labeled corpus.
    Generate(GenerateArgs),
    /// Turn a session log into a feature matrix.
    Extract(ExtractArgs),
    /// Run best-first CFS feature selection on a feature matrix.
    SelectFeatures(SelectArgs),
    /// Train a model on a feature matrix and write a model file.
    Train(TrainArgs),
    /// Cross-validate, or train on one matrix and test on another.
    Evaluate(EvaluateArgs),
    /// Label every session of a log (or rows of a matrix) with a model.
    Classify(ClassifyArgs),
    /// Replay sessions turn by turn with incremental predictions.
    Monitor(MonitorArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StyleArg {
    Lego,
    Lg2014,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    /// Output corpus path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = StyleArg::Lego)]
    pub style: StyleArg,
    /// Sessions per class.
    #[arg(long, conflicts_with = "total")]
    pub per_class: Option<usize>,
    /// Total sessions, split by the class priors.
    #[arg(long)]
    pub total: Option<usize>,
    /// JSON file replacing the built-in class profiles.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    /// Corpus name; defaults to `synthetic-<style>`.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExtractionArgs {
    /// Opening prompt length used when a session does not record its own.
    #[arg(long, default_value_t = 10.25)]
    pub prompt_duration: f64,
    /// Estimate phone counts from transcripts when counts are absent.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub estimate_phones: bool,
    /// Comma-separated help keywords.
    #[arg(long, default_value = "help")]
    pub help_keywords: String,
    #[arg(long, default_value = "0")]
    pub help_dtmf_key: String,
}

#[derive(Debug, Args, Serialize)]
pub struct ExtractArgs {
    /// Session log to read.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output feature-matrix path.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub extraction: ExtractionArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BalanceArg {
    None,
    Before,
    Inside,
}

impl From<BalanceArg> for Balance {
    fn from(b: BalanceArg) -> Balance {
        match b {
            BalanceArg::None => Balance::None,
            BalanceArg::Before => Balance::BeforeFolds,
            BalanceArg::Inside => Balance::InsideFolds,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementArg {
    Outside,
    Inside,
}

impl From<PlacementArg> for SelectionMode {
    fn from(p: PlacementArg) -> SelectionMode {
        match p {
            PlacementArg::Outside => SelectionMode::Outside,
            PlacementArg::Inside => SelectionMode::Inside,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SelectArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    /// Feature set searched.
    #[arg(long, default_value = "all")]
    pub set: String,
    /// Spread-subsample the rows before searching.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub balance: bool,
    /// Non-improving expansions before the search stops.
    #[arg(long, default_value_t = 5)]
    pub termination: usize,
    /// Also write the report to this path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerArg {
    Forest,
    Svm,
}

#[derive(Debug, Args, Serialize)]
pub struct LearnerArgs {
    #[arg(long, value_enum, default_value_t = LearnerArg::Forest)]
    pub learner: LearnerArg,
    /// Forest size.
    #[arg(long, default_value_t = 1000)]
    pub trees: usize,
    /// Features tried per split; default `floor(log2 M) + 1`.
    #[arg(long)]
    pub mtry: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub min_leaf: usize,
    /// SVM complexity constant.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// SVM KKT tolerance.
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    /// Cap on SMO pair updates.
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iterations: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    /// Output model path.
    #[arg(long)]
    pub out: PathBuf,
    /// Feature set; `selected` runs best-first selection over All.
    #[arg(long, default_value = "all")]
    pub set: String,
    /// Spread-subsample the training rows first.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub balance: bool,
    #[arg(long, default_value_t = 5)]
    pub termination: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub learner: LearnerArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    /// Matrix to cross-validate.
    #[arg(long, required_unless_present = "train", conflicts_with_all = ["train", "test"])]
    pub matrix: Option<PathBuf>,
    /// Training matrix for a cross-corpus test.
    #[arg(long, requires = "test")]
    pub train: Option<PathBuf>,
    /// Test matrix for a cross-corpus test.
    #[arg(long, requires = "train")]
    pub test: Option<PathBuf>,
    /// Comma-separated feature sets, or `all-sets` for the full table.
    #[arg(long, default_value = "all-sets")]
    pub sets: String,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = BalanceArg::None)]
    pub balance: BalanceArg,
    /// Where the Selected row runs feature selection.
    #[arg(long, value_enum, default_value_t = PlacementArg::Outside)]
    pub selection: PlacementArg,
    #[arg(long, default_value_t = 5)]
    pub termination: usize,
    /// Include per-row predictions in JSON output.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub predictions: bool,
    /// Also write the report to this path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub learner: LearnerArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Session log to classify.
    #[arg(long, required_unless_present = "matrix", conflicts_with = "matrix")]
    pub corpus: Option<PathBuf>,
    /// Feature matrix to classify.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub extraction: ExtractionArgs,
    /// Also write the report to this path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct MonitorArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Session log, or a file holding bare session records.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Replay only this session.
    #[arg(long)]
    pub session: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub extraction: ExtractionArgs,
}

/// Reads `key = value` lines; `#` starts a comment line.
fn read_config(path: &Path) -> anyhow::Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("config {}: {e}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            anyhow::anyhow!(
                "config {} line {}: expected key = value",
                path.display(),
                i + 1
            )
        })?;
        let key = k.trim().replace('_', "-");
        if key == "config" {
            anyhow::bail!(
                "config {} line {}: config files cannot include others",
                path.display(),
                i + 1
            );
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Finds `--config PATH` or `--config=PATH` without a full parse, so that
/// required flags may come from the file.
fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let a = a.to_string_lossy();
        if a == "--" {
            break;
        }
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Parses the command line with the config file's entries appended, so
/// that they take precedence over flags.
fn parse_cli(mut args: Vec<OsString>) -> Result<Cli, CliFailure> {
    if let Some(path) = config_path(&args) {
        for (k, v) in read_config(&path).map_err(CliFailure::Runtime)? {
            args.push(format!("--{k}").into());
            args.push(v.into());
        }
    }
    Cli::try_parse_from(&args).map_err(CliFailure::Usage)
}

enum CliFailure {
    Usage(clap::Error),
    Runtime(anyhow::Error),
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    if let Some(core) = e.downcast_ref::<expertise_core::Error>() {
        return core.kind();
    }
    if e.downcast_ref::<std::io::Error>().is_some() {
        return "io";
    }
    "error"
}

/// One JSON object on stderr describing the failure.
fn report_error(kind: &str, message: &str) {
    let line = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{line}");
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match parse_cli(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(CliFailure::Usage(e)) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            report_error("usage", e.render().to_string().trim());
            return ExitCode::from(2);
        }
        Err(CliFailure::Runtime(e)) => {
            report_error(error_kind(&e), &format!("{e:#}"));
            return ExitCode::FAILURE;
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(error_kind(&e), &format!("{e:#}"));
            ExitCode::FAILURE
        }
    }
}
