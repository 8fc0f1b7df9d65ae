//! `sadge`: score synthetic datasets against a real domain and calibrate the
//! fused appearance/geometry score.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sadge_core::datamodel::NormalizationScope;
use sadge_core::fusion::FusionEquation;

#[derive(Debug, Parser)]
#[command(name = "sadge", version, about = "Training-free synthetic dataset evaluation")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Benchmark config (TOML).
    #[arg(long, short = 'c', global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config's top-level seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available hardware parallelism.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Directory of the persistent pair-score cache; in-memory when omitted.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Where run summaries, tables and exports are written.
    #[arg(long, short = 'o', global = true, default_value = "sadge-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct FitArgs {
    /// Appearance metric id; defaults to the config's [fusion] choice.
    #[arg(long)]
    pub appearance: Option<String>,
    /// Geometry metric id; defaults to the config's [fusion] choice.
    #[arg(long)]
    pub geometry: Option<String>,
    #[arg(long, default_value = "constrained_polynomial")]
    pub equation: FusionEquation,
    #[arg(long, value_parser = parse_scope)]
    pub scope: Option<NormalizationScope>,
    /// Optimizer restarts; defaults to the config value.
    #[arg(long)]
    pub starts: Option<usize>,
}

fn parse_scope(s: &str) -> Result<NormalizationScope, String> {
    match s {
        "per_collection" | "per-collection" => Ok(NormalizationScope::PerCollection),
        "pooled" => Ok(NormalizationScope::Pooled),
        _ => Err(format!("unknown scope '{s}' (per_collection | pooled)")),
    }
}

fn parse_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect()
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pair, score and aggregate every variant; writes variants.csv.
    Score {
        #[command(flatten)]
        fit: FitArgs,
        /// Overrides every collection's retrieval pool size.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Score, normalize and fit the fusion model.
    Fit {
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Leave-one-dataset-out refits against single-metric baselines.
    Lodo {
        #[command(flatten)]
        fit: FitArgs,
        /// Normalize with statistics from the full benchmark in every split.
        #[arg(long)]
        reuse_full_stats: bool,
    },
    /// Correlation heatmaps over each pair of fusion coefficients.
    Grid {
        #[command(flatten)]
        fit: FitArgs,
        /// Cells per axis.
        #[arg(long, default_value_t = 50)]
        size: usize,
    },
    /// Refit at several retrieval pool sizes.
    Ksweep {
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, default_value = "1,3,5,10", value_delimiter = ',', value_parser = parse_k)]
        ks: Vec<usize>,
    },
    /// Fit every appearance x geometry metric combination.
    Sweep {
        #[command(flatten)]
        fit: FitArgs,
        /// Comma-separated appearance metric ids; defaults to all appearance metrics.
        #[arg(long)]
        appearance_metrics: Option<String>,
        /// Comma-separated geometry metric ids; defaults to all geometry metrics.
        #[arg(long)]
        geometry_metrics: Option<String>,
    },
    /// Time each metric on the first pairs of the pairing plans.
    Bench {
        /// Number of pairs to score per metric.
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        /// Comma-separated metric ids; defaults to every configured metric.
        #[arg(long)]
        metrics: Option<String>,
        /// Free-text hardware note stored with the table.
        #[arg(long, default_value = "cpu")]
        device: String,
    },
    /// Generate the synthetic benchmark into the output directory.
    Synth {
        /// Synthetic images per family (real captures and per-variant images).
        #[arg(long)]
        images: Option<usize>,
    },
    /// Write CSV exports from the run summary in the output directory.
    Report,
}

fn parse_k(s: &str) -> Result<usize, String> {
    s.parse::<usize>().map_err(|e| format!("'{s}': {e}"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
