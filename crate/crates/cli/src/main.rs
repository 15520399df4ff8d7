//! `lexsim` — deterministic pipeline over a document corpus: context bags
//! per target word, normalized similarity matrix, shuffled null model,
//! classical MDS, and Ward clustering, with plot-ready report files.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/validation error.

mod manifest;
mod stages;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use lexsim_core::cluster::DistanceKind;
use lexsim_core::PipelineConfig;

#[derive(Debug)]
pub enum AppError {
    /// Bad flags or configuration; exit code 1.
    Usage(String),
    /// Unreadable or invalid data; exit code 2.
    Data(String),
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Usage(msg) | AppError::Data(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<lexsim_core::Error> for AppError {
    fn from(err: lexsim_core::Error) -> Self {
        AppError::Data(err.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "lexsim",
    version,
    about = "Context-window similarity over target words: bags, cosine matrix, null model, MDS, Ward clustering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest the corpus into one bag of context words per target
    Ingest(CommonArgs),
    /// Build the normalized similarity matrix, ranked entries and stats
    Sim(SimArgs),
    /// Shuffled null model: similarity of randomly re-dealt bags
    Null(CommonArgs),
    /// Spectral decomposition, principal coordinates and stress curve
    Mds(MdsArgs),
    /// Ward dendrogram, merge log, Newick export and k-cut partition
    Cluster(ClusterArgs),
    /// Plot-ready report files assembled from prior stage outputs
    Report(CommonArgs),
    /// All stages in order
    Run(CommonArgs),
}

fn parse_distance(s: &str) -> Result<DistanceKind, String> {
    DistanceKind::from_str(s)
}

#[derive(Args)]
struct CommonArgs {
    /// Config file (TOML; keys mirror these flags). Flags override it.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Corpus root: one subdirectory of .txt documents per target
    #[arg(long, value_name = "DIR")]
    corpus_dir: Option<PathBuf>,

    /// Target list, one word per line ('#' comments). Default: bundled list
    #[arg(long, value_name = "FILE")]
    targets: Option<PathBuf>,

    /// Stoplist, one word per line. Default: bundled function-word list
    #[arg(long, value_name = "FILE")]
    stoplist: Option<PathBuf>,

    /// Context half-width h; each window is 2h+1 tokens [default: 20]
    #[arg(long, value_name = "H")]
    half_width: Option<usize>,

    /// Contexts kept per target; fewer excludes the target [default: 50]
    #[arg(long, value_name = "N")]
    max_contexts: Option<usize>,

    /// Minimum token length kept by cleanup [default: 3]
    #[arg(long, value_name = "LEN")]
    min_word_length: Option<usize>,

    /// Use at most one context per document [default: true]
    #[arg(long, value_name = "BOOL")]
    one_per_doc: Option<bool>,

    /// Base seed for the null model; replicate r uses seed + r [default: 0]
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,

    /// Number of null-model replicates [default: 1]
    #[arg(long, value_name = "N")]
    replicates: Option<usize>,

    /// Similarity-to-distance conversion: sqrt2 | one-minus [default: sqrt2]
    #[arg(long, value_name = "KIND", value_parser = parse_distance)]
    distance: Option<DistanceKind>,

    /// Cluster count for the flat partition [default: 25]
    #[arg(long, value_name = "K")]
    k: Option<usize>,

    /// Directory for all stage outputs [default: out]
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Least-squares fit of value vs rank over this inclusive rank range
    #[arg(long, num_args = 2, value_names = ["R_LO", "R_HI"])]
    fit: Option<Vec<usize>>,
}

#[derive(Args)]
struct MdsArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Least-squares fit of the stress curve tail over this m range
    #[arg(long, num_args = 2, value_names = ["M_LO", "M_HI"])]
    fit_tail: Option<Vec<usize>>,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Print the first T merges with member labels
    #[arg(long, value_name = "T")]
    trace: Option<usize>,
}

fn resolve_config(args: &CommonArgs) -> Result<PipelineConfig, AppError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                AppError::Usage(format!("cannot read config file {}: {e}", path.display()))
            })?;
            toml::from_str(&text)
                .map_err(|e| AppError::Usage(format!("config file {}: {e}", path.display())))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(v) = &args.corpus_dir {
        cfg.corpus_dir = Some(v.clone());
    }
    if let Some(v) = &args.targets {
        cfg.targets_file = Some(v.clone());
    }
    if let Some(v) = &args.stoplist {
        cfg.stoplist_file = Some(v.clone());
    }
    if let Some(v) = args.half_width {
        cfg.half_width = v;
    }
    if let Some(v) = args.max_contexts {
        cfg.max_contexts = v;
    }
    if let Some(v) = args.min_word_length {
        cfg.min_word_length = v;
    }
    if let Some(v) = args.one_per_doc {
        cfg.one_per_doc = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.replicates {
        cfg.replicates = v;
    }
    if let Some(v) = args.distance {
        cfg.distance = v;
    }
    if let Some(v) = args.k {
        cfg.k = v;
    }
    if let Some(v) = &args.out_dir {
        cfg.out_dir = v.clone();
    }
    cfg.validate().map_err(AppError::Usage)?;
    Ok(cfg)
}

fn range_pair(values: Option<Vec<usize>>) -> Option<(usize, usize)> {
    values.and_then(|v| (v.len() == 2).then(|| (v[0], v[1])))
}

fn dispatch(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Ingest(args) => stages::ingest(&resolve_config(&args)?),
        Command::Sim(args) => stages::sim(&resolve_config(&args.common)?, range_pair(args.fit)),
        Command::Null(args) => stages::null(&resolve_config(&args)?),
        Command::Mds(args) => {
            stages::mds(&resolve_config(&args.common)?, range_pair(args.fit_tail))
        }
        Command::Cluster(args) => stages::cluster(&resolve_config(&args.common)?, args.trace),
        Command::Report(args) => stages::report(&resolve_config(&args)?),
        Command::Run(args) => stages::run_all(&resolve_config(&args)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(AppError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
