//! Command-line front end. Every flag is optional on the command line and
//! falls back to the matching key of the `--config` file, then to the
//! built-in default.

mod commands;
mod manifest;
mod settings;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use mpopf::training::TrainMode;
use mpopf::{Error, Result};

use manifest::RunManifest;
use settings::{
    config_section, resolve, EvalSettings, GenDataSettings, SolveSettings, TrainSettings,
};

#[derive(Debug, Parser)]
#[command(
    name = "mpopf",
    version,
    about = "Multi-period DC-OPF with learned, projection-feasible dispatch"
)]
pub struct Cli {
    /// TOML file with `[gen_data]`, `[solve]`, `[train]` and `[eval]` tables.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Parent directory of run directories.
    #[arg(long, global = true, default_value = "runs")]
    pub out_dir: PathBuf,
    /// Exact output directory instead of a fresh timestamped one.
    #[arg(long, global = true)]
    pub run_dir: Option<PathBuf>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a demand dataset and its exact dispatch labels.
    GenData(GenDataArgs),
    /// Solve the exact multi-period dispatch for a dataset or one demand file.
    Solve(SolveArgs),
    /// Train a surrogate on a dataset.
    Train(TrainArgs),
    /// Score checkpoints and the exact solver on the test split.
    Eval(EvalArgs),
    /// Re-run the invocation recorded in a run manifest.
    Replay { manifest: PathBuf },
}

#[derive(Debug, Args, Serialize)]
pub struct GenDataArgs {
    /// Built-in case name or path to a case TOML file.
    #[arg(long)]
    case: Option<String>,
    /// Number of scenarios.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Half-width of the uniform multiplicative demand noise.
    #[arg(long)]
    noise: Option<f64>,
    /// Load scale applied to every scenario.
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Do not solve for exact labels.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    no_labels: Option<bool>,
}

#[derive(Debug, Args, Serialize)]
pub struct SolveArgs {
    #[arg(long)]
    case: Option<String>,
    /// Dataset directory written by `gen-data`.
    #[arg(long, conflicts_with = "demand")]
    dataset: Option<String>,
    /// CSV file, one row per hour, one column per load in MW.
    #[arg(long)]
    demand: Option<String>,
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    mode: Option<TrainMode>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Train, validation and test ratios.
    #[arg(long, value_delimiter = ',')]
    split: Option<Vec<f64>>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    dataset: Option<String>,
    /// Checkpoint files to score (repeatable or comma separated).
    #[arg(long = "checkpoint", value_delimiter = ',')]
    checkpoints: Option<Vec<String>>,
    /// Load scales applied to the test scenarios.
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
    /// Include the exact solver scored against itself.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    exact: Option<bool>,
    /// Split seed (defaults to the training seed of the first checkpoint).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    split: Option<Vec<f64>>,
    #[arg(long)]
    jobs: Option<usize>,
}

/// Settings as resolved for one subcommand.
#[derive(Debug, Clone)]
pub enum Resolved {
    GenData(GenDataSettings),
    Solve(SolveSettings),
    Train(TrainSettings),
    Eval(EvalSettings),
}

impl Resolved {
    pub fn name(&self) -> &'static str {
        match self {
            Resolved::GenData(_) => "gen-data",
            Resolved::Solve(_) => "solve",
            Resolved::Train(_) => "train",
            Resolved::Eval(_) => "eval",
        }
    }

    fn from_manifest(m: &RunManifest) -> Result<Self> {
        let none = Value::Object(Default::default());
        let c = m.config.clone();
        Ok(match m.subcommand.as_str() {
            "gen-data" => Resolved::GenData(resolve(c, none)?),
            "solve" => Resolved::Solve(resolve(c, none)?),
            "train" => Resolved::Train(resolve(c, none)?),
            "eval" => Resolved::Eval(resolve(c, none)?),
            other => {
                return Err(Error::Config(format!(
                    "manifest records unknown subcommand `{other}`"
                )))
            }
        })
    }
}

fn cli_layer(args: &impl Serialize) -> Result<Value> {
    serde_json::to_value(args).map_err(|e| Error::Config(e.to_string()))
}

pub fn run(cli: Cli) -> Result<()> {
    let file = |section: &str| match &cli.config {
        Some(path) => config_section(path, section),
        None => Ok(Value::Object(Default::default())),
    };
    let resolved = match &cli.command {
        Command::GenData(a) => Resolved::GenData(resolve(file("gen_data")?, cli_layer(a)?)?),
        Command::Solve(a) => Resolved::Solve(resolve(file("solve")?, cli_layer(a)?)?),
        Command::Train(a) => Resolved::Train(resolve(file("train")?, cli_layer(a)?)?),
        Command::Eval(a) => Resolved::Eval(resolve(file("eval")?, cli_layer(a)?)?),
        Command::Replay { manifest } => Resolved::from_manifest(&RunManifest::load(manifest)?)?,
    };
    commands::execute(&resolved, &cli.out_dir, cli.run_dir.as_deref())
}
