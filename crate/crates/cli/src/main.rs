//! `votecast`: command-line front end for the forecasting engine.
//!
//! Exit status is 0 on success, 1 when input or configuration fails
//! validation and 2 on any other runtime error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use votecast::arimax::ArimaxOrder;
use votecast::regressors::RegressorSpec;

#[derive(Debug, Parser)]
#[command(name = "votecast", version, about = "Vote-share forecasting from social-media volumes and polls")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command; each overrides the config field of the same name.
#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    interactions: Option<PathBuf>,
    #[arg(long, global = true)]
    polls: Option<PathBuf>,
    /// Comma-separated subject names.
    #[arg(long, global = true, value_delimiter = ',')]
    subjects: Option<Vec<String>>,
    /// Comma-separated feature sets (twitter, facebook, instagram, all).
    #[arg(long = "feature-sets", global = true, value_delimiter = ',')]
    feature_sets: Option<Vec<String>>,
    /// Comma-separated window lengths in days.
    #[arg(long, global = true, value_delimiter = ',')]
    windows: Option<Vec<usize>>,
    /// Comma-separated models (linear, random_forest, gradient_boosting, arimax).
    #[arg(long, global = true, value_delimiter = ',')]
    models: Option<Vec<String>>,
    /// Window anchors: tumbling or rolling.
    #[arg(long, global = true)]
    anchors: Option<String>,
    /// ARIMAX order as `p,d,q`.
    #[arg(long = "arimax-order", global = true, value_parser = parse_order)]
    arimax_order: Option<ArimaxOrder>,
    /// Random forest hyperparameters as a JSON object.
    #[arg(long = "random-forest", global = true, value_parser = parse_spec)]
    random_forest: Option<RegressorSpec>,
    /// Gradient boosting hyperparameters as a JSON object.
    #[arg(long = "gradient-boosting", global = true, value_parser = parse_spec)]
    gradient_boosting: Option<RegressorSpec>,
    #[arg(long = "initial-train-fraction", global = true)]
    initial_train_fraction: Option<f64>,
    #[arg(long = "max-train-rows", global = true)]
    max_train_rows: Option<usize>,
    /// Master seed; falls back to the config file, then $VOTECAST_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long = "output-dir", global = true)]
    output_dir: Option<PathBuf>,
    /// Omit the generated-at header line from output files.
    #[arg(long, global = true)]
    deterministic: bool,
}

impl CommonArgs {
    fn overrides(&self) -> RunConfig {
        RunConfig {
            interactions: self.interactions.clone(),
            polls: self.polls.clone(),
            subjects: self.subjects.clone(),
            feature_sets: self.feature_sets.clone(),
            windows: self.windows.clone(),
            models: self.models.clone(),
            anchors: self.anchors.clone(),
            arimax_order: self.arimax_order,
            random_forest: self.random_forest,
            gradient_boosting: self.gradient_boosting,
            initial_train_fraction: self.initial_train_fraction,
            max_train_rows: self.max_train_rows,
            seed: self.seed,
            output_dir: self.output_dir.clone(),
        }
    }
}

fn parse_order(s: &str) -> Result<ArimaxOrder, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [p, d, q] = parts.as_slice() else {
        return Err(format!("expected p,d,q, got {s:?}"));
    };
    let num = |v: &str| v.parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok(ArimaxOrder::new(num(p)?, num(d)?, num(q)?))
}

fn parse_spec(s: &str) -> Result<RegressorSpec, String> {
    serde_json::from_str(s).map_err(|e| e.to_string())
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the synthetic benchmark interactions.csv and polls.csv.
    Synth {
        #[arg(long, default_value_t = votecast::synth::BENCHMARK_DAYS)]
        days: usize,
        #[arg(long, default_value_t = votecast::synth::BENCHMARK_CADENCE)]
        cadence: usize,
    },
    /// Check interaction and poll files against the input schema.
    Validate,
    /// Walk-forward evaluation over feature sets, windows and models.
    Grid,
    /// Predicted share per subject at the final anchor.
    Forecast {
        /// Window for the forecast dataset (default: first configured window).
        #[arg(long)]
        window: Option<usize>,
        /// Feature set (default: first configured feature set).
        #[arg(long = "feature-set")]
        feature_set: Option<String>,
        /// Model (default: arimax when configured, else the first model).
        #[arg(long)]
        model: Option<String>,
    },
    /// Allocate undecided voters proportionally.
    Redistribute {
        /// CSV with `subject` and `share_pct` columns, for example forecast output.
        #[arg(long)]
        shares: PathBuf,
    },
    /// Round-two vote-transfer scenarios.
    Scenario {
        /// Scenario JSON: base shares, finalists, pool, builtin or rules.
        #[arg(long = "scenario-config")]
        scenario_config: PathBuf,
        /// Use the ten standard scenarios regardless of the file's rules.
        #[arg(long)]
        builtin: bool,
    },
    /// Trend, seasonal and residual components of one subject's daily poll series.
    Decompose {
        #[arg(long)]
        subject: String,
        #[arg(long, default_value_t = 30)]
        period: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Validation(e)) => {
            eprintln!("validation failed: {e:#}");
            ExitCode::from(1)
        }
        Err(commands::Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
