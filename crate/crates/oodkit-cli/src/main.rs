//! `oodkit` — command-line front end for the OOD-detection toolkit.
//!
//! Six commands cover the desk workflow end to end:
//!
//! * `score`     — score a logit matrix (or features × prototypes) with one
//!   of the nine scoring methods; writes a score file.
//! * `eval`      — compare an ID score file against an OOD score file
//!   (FPR at TPR 0.95, AUROC, AUPR with ID positive) and append the result
//!   to the journal.
//! * `select-n`  — pick the informative top-N logit subspace, either by the
//!   adaptive synthetic-outlier max-gap search or the fixed class-count
//!   rule (`--fixed`).
//! * `synth-ood` — generate synthetic outlier features standalone.
//! * `simulate`  — run a seeded Monte Carlo theorem check
//!   (`nonmax-order` or `mcm-dominance`).
//! * `report`    — emit plot-ready CSVs: per-rank mean logit curves,
//!   per-class score summaries, and a benchmark table aggregated from the
//!   journal.
//!
//! ## Configuration
//!
//! `--config FILE` loads a JSON document with one flat section per command
//! (`score`, `eval`, `select_n`, `synth_ood`, `simulate`, `report`) plus a
//! top-level `journal` path. Command-line flags override config values;
//! everything has a built-in default except input paths. Each journaled
//! record echoes the fully resolved configuration, so any result can be
//! reproduced from its own record.
//!
//! ## Exit codes
//!
//! | code | meaning                                                    |
//! |------|------------------------------------------------------------|
//! | 0    | success (for `simulate`: the theorem check passed)         |
//! | 1    | unexpected internal failure                                |
//! | 2    | invalid flags or configuration values                      |
//! | 3    | unreadable or malformed input data                         |
//! | 4    | valid inputs on which the operation is mathematically undefined (degenerate mixture, single-class data, ill-trained world, ...) |
//! | 5    | `simulate` ran to completion and the theorem check failed  |
//!
//! ## Reproducibility
//!
//! Every random decision flows from an explicit `--seed`; rerunning any
//! command with the same inputs and flags produces byte-identical output
//! files regardless of `OODKIT_THREADS` (which caps the size of the
//! internal thread pool). Set `SOURCE_DATE_EPOCH` to pin journal
//! timestamps.

mod commands;
mod config;
mod record;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use oodkit::scoring::{Method, Normalization, Transform};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DOMAIN: i32 = 4;
pub const EXIT_CHECK_FAILED: i32 = 5;

const DEFAULT_JOURNAL: &str = "oodkit-journal.jsonl";

/// CLI-side error wrapper: keeps the library error (for its exit-code
/// class) or carries a front-end configuration/data message.
#[derive(Debug)]
pub enum CliError {
    Lib(oodkit::Error),
    Config(String),
    Data(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Lib(e) => e.fmt(f),
            CliError::Config(msg) | CliError::Data(msg) => f.write_str(msg),
        }
    }
}

impl From<oodkit::Error> for CliError {
    fn from(e: oodkit::Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lib(e) => lib_exit_code(e),
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

/// Map library errors onto the documented exit-code classes.
fn lib_exit_code(err: &oodkit::Error) -> i32 {
    use oodkit::Error::*;
    match err {
        // Parameters the user chose.
        InvalidParameter { .. } | BadN { .. } => EXIT_CONFIG,
        // Problems with the bytes or shape of input data.
        Io { .. }
        | MalformedHeader { .. }
        | RaggedRows { .. }
        | ParseFailure { .. }
        | NonFiniteValue { .. }
        | DimensionOverflow { .. }
        | NegativeLabel { .. }
        | LabelOutOfRange { .. }
        | ZeroRow { .. }
        | DimensionMismatch { .. }
        | EmptyRow
        | EmptyMatrix
        | TooFewClasses { .. } => EXIT_DATA,
        // Well-formed inputs on which the operation is undefined.
        SingleClassDataset
        | TooFewSamples { .. }
        | NotSorted { .. }
        | EmptySet { .. }
        | TooLarge { .. }
        | BadWorld { .. }
        | IllTrainedClassifier { .. }
        | DegenerateMixture { .. } => EXIT_DOMAIN,
        ScoreRow { source, .. } => lib_exit_code(source),
    }
}

#[derive(Parser)]
#[command(
    name = "oodkit",
    version,
    about = "Post-hoc out-of-distribution detection on precomputed classifier logits",
    after_help = "Exit codes: 0 ok, 2 bad flags/config, 3 bad input data, \
                  4 undefined on these inputs, 5 theorem check failed."
)]
struct Cli {
    /// JSON run-configuration file; flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Results journal (append-only JSON lines)
    #[arg(long, global = true, value_name = "FILE")]
    journal: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a logit matrix (or features projected through prototypes)
    Score(ScoreArgs),
    /// Evaluate ID vs OOD score files and journal the metrics
    Eval(EvalArgs),
    /// Pick the top-N logit subspace (max-gap search, or --fixed rule)
    SelectN(SelectNArgs),
    /// Generate synthetic outlier features by inter-class interpolation
    SynthOod(SynthOodArgs),
    /// Run a seeded Monte Carlo theorem check
    Simulate(SimulateArgs),
    /// Emit plot-ready CSV summaries and the benchmark table
    Report(ReportArgs),
}

/// Scorer parameters shared by `score` and `report`.
#[derive(Args, Debug, Clone, Default)]
pub struct ScorerFlags {
    /// Scoring method (maxlogit | mcm | energy | gen | margin | logitgap |
    /// logitgap_topn | logitgap_softmax | logitgap_variant)
    #[arg(long)]
    method: Option<Method>,
    /// Softmax temperature τ
    #[arg(long)]
    tau: Option<f64>,
    /// N for the top-N gap methods (2 ≤ N ≤ K)
    #[arg(long)]
    top_n: Option<usize>,
    /// Generalized-entropy exponent γ ∈ (0, 1)
    #[arg(long)]
    gamma: Option<f64>,
    /// Generalized-entropy truncation M ≤ K
    #[arg(long)]
    gen_m: Option<usize>,
    /// Energy temperature T
    #[arg(long)]
    energy_t: Option<f64>,
    /// Gap transform for logitgap_variant (exp | square | sqrt)
    #[arg(long)]
    transform: Option<Transform>,
    /// Tail normalization (over_n_minus_1 | over_n)
    #[arg(long)]
    normalization: Option<Normalization>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Logit matrix (CSV with header, or the binary container)
    #[arg(long, value_name = "FILE", conflicts_with = "features")]
    input: Option<PathBuf>,
    /// Feature matrix to project through --prototypes
    #[arg(long, value_name = "FILE", requires = "prototypes")]
    features: Option<PathBuf>,
    /// Class-prototype matrix (one row per class)
    #[arg(long, value_name = "FILE")]
    prototypes: Option<PathBuf>,
    /// Cosine logit multiplier (projection path only)
    #[arg(long)]
    scale: Option<f64>,
    #[command(flatten)]
    scorer: ScorerFlags,
    /// Output score file
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Output format: csv | binary
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    /// ID (in-distribution) score file
    #[arg(value_name = "ID_SCORES")]
    id_scores: PathBuf,
    /// OOD score file
    #[arg(value_name = "OOD_SCORES")]
    ood_scores: PathBuf,
    /// Method label recorded with the result
    #[arg(long)]
    method: Option<String>,
    /// Dataset label recorded with the result (default: OOD file stem)
    #[arg(long)]
    dataset: Option<String>,
    /// Optional metrics table to write
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Table format: csv | markdown | jsonl
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct SelectNArgs {
    /// Feature matrix (CSV may embed a `label` column)
    #[arg(long, value_name = "FILE")]
    features: Option<PathBuf>,
    /// Label file (one class index per line, or a CSV with a label column)
    #[arg(long, value_name = "FILE")]
    labels: Option<PathBuf>,
    /// Class-prototype matrix
    #[arg(long, value_name = "FILE")]
    prototypes: Option<PathBuf>,
    /// Cosine logit multiplier
    #[arg(long)]
    scale: Option<f64>,
    /// Interpolation coefficient α ∈ [0, 1]
    #[arg(long)]
    alpha: Option<f64>,
    /// Noise weight β ≥ 0 (default chosen by class count)
    #[arg(long)]
    beta: Option<f64>,
    /// ID validation subset size
    #[arg(long)]
    val_size: Option<usize>,
    /// Synthetic sample count (default: --val-size)
    #[arg(long)]
    count: Option<usize>,
    /// RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Smallest N to search
    #[arg(long)]
    n_min: Option<usize>,
    /// Largest N to search
    #[arg(long)]
    n_max: Option<usize>,
    /// Use the fixed class-count rule instead of the adaptive search
    #[arg(long)]
    fixed: bool,
    /// Class count K (--fixed without --prototypes)
    #[arg(long)]
    k: Option<usize>,
    /// Also write the selection as a JSON document
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthOodArgs {
    /// Feature matrix (CSV may embed a `label` column)
    #[arg(long, value_name = "FILE")]
    features: Option<PathBuf>,
    /// Label file (one class index per line, or a CSV with a label column)
    #[arg(long, value_name = "FILE")]
    labels: Option<PathBuf>,
    /// Interpolation coefficient α ∈ [0, 1]
    #[arg(long)]
    alpha: Option<f64>,
    /// Noise weight β ≥ 0 (default chosen by class count)
    #[arg(long)]
    beta: Option<f64>,
    /// Default sample count when --count is not given
    #[arg(long)]
    val_size: Option<usize>,
    /// Synthetic sample count
    #[arg(long)]
    count: Option<usize>,
    /// RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output feature file
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Output format: csv | binary
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Theorem check: nonmax-order | mcm-dominance
    #[arg(long)]
    theorem: Option<String>,
    /// World-configuration JSON (nonmax-order only; default: the built-in
    /// reference two-class world)
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Class count of the reference world (mcm-dominance)
    #[arg(long)]
    k: Option<usize>,
    /// Softmax temperature (mcm-dominance; default 2(K-1)+1)
    #[arg(long)]
    tau: Option<f64>,
    /// Monte Carlo samples per cohort
    #[arg(long)]
    samples: Option<usize>,
    /// RNG seed (nonmax-order: overrides the world's seed)
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the full report as a JSON document
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// ID logit matrix
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// OOD logit matrix
    #[arg(long, value_name = "FILE")]
    ood: Option<PathBuf>,
    #[command(flatten)]
    scorer: ScorerFlags,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn init_thread_pool() {
    if let Ok(raw) = std::env::var("OODKIT_THREADS") {
        match raw.parse::<usize>() {
            Ok(n) if n > 0 => {
                // Ignore "already initialized": only the first builder wins.
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => eprintln!("warning: ignoring OODKIT_THREADS={raw:?} (want a positive integer)"),
        }
    }
}

fn main() {
    init_thread_pool();
    let cli = Cli::parse();
    std::process::exit(run(cli));
}

fn run(cli: Cli) -> i32 {
    let cfg = match config::ConfigFile::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let journal = cli
        .journal
        .or_else(|| cfg.journal.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_JOURNAL));
    let result = match &cli.command {
        Command::Score(args) => commands::score::run(args, &cfg),
        Command::Eval(args) => commands::eval::run(args, &cfg, &journal),
        Command::SelectN(args) => commands::select_n::run(args, &cfg, &journal),
        Command::SynthOod(args) => commands::synth_ood::run(args, &cfg),
        Command::Simulate(args) => commands::simulate::run(args, &cfg, &journal),
        Command::Report(args) => commands::report::run(args, &cfg, &journal),
    };
    match result {
        Ok(code) => code,
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}
