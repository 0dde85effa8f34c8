//! `ovigo`: build scene graphs from posed RGB-D manifests, ground queries
//! against them and evaluate the results.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit status for failures inside a pipeline stage.
pub const EXIT_PIPELINE: u8 = 1;
/// Exit status for unreadable or malformed inputs and bad usage.
pub const EXIT_INPUT: u8 = 2;

#[derive(Debug)]
pub enum CliError {
    Input(anyhow::Error),
    Pipeline(anyhow::Error),
}

impl CliError {
    pub fn input(e: impl Into<anyhow::Error>) -> Self {
        CliError::Input(e.into())
    }

    pub fn pipeline(e: impl Into<anyhow::Error>) -> Self {
        CliError::Pipeline(e.into())
    }
}

#[derive(Parser, Debug)]
#[command(name = "ovigo", version, about = "Hierarchical 3D scene graphs and query grounding")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// JSON config file; missing keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one config value, e.g. `--set floors.p_h=0.85`. Applied after --config, in order.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Worker threads for per-floor stages. Defaults to available parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Pair a dangling top floor boundary with the cloud's highest point.
    #[arg(long, global = true)]
    pub force_extend: bool,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a scene graph from a manifest of frames and detections.
    BuildGraph {
        #[arg(long)]
        manifest: PathBuf,
        /// Output graph JSON; point clouds go to a sibling `.clouds` directory.
        #[arg(long)]
        out: PathBuf,
        /// Replay LLM answers from a transcript instead of calling an endpoint.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Ground one query or a benchmark file against a graph.
    Ground {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, conflicts_with = "benchmark", required_unless_present = "benchmark")]
        query: Option<String>,
        /// JSONL file of `{"query", "gt_box"}` items.
        #[arg(long)]
        benchmark: Option<PathBuf>,
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Write the result JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// F1 of the graph's location masks against ground-truth polygons over a range of IoU thresholds.
    EvalLocations {
        #[arg(long)]
        graph: PathBuf,
        /// Ground truth as written by `gen-fixture`.
        #[arg(long)]
        ground_truth: PathBuf,
        /// Comma-separated IoU thresholds.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
        deltas: Vec<f64>,
        /// Order in which predictions claim ground truth.
        #[arg(long, value_enum, default_value_t = Order::BestIou)]
        order: Order,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Accuracy at IoU thresholds for a benchmark file.
    EvalGrounding {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        benchmark: PathBuf,
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic scene with ground truth, benchmark and transcript.
    GenFixture {
        /// Fixture spec JSON. Without it the two-storey apartment is generated.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Replace the fixture spec's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Static renders of a graph.
    Export {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum)]
        kind: ExportKind,
        /// Directory for bev-png, file for graph-dot.
        #[arg(long)]
        out: PathBuf,
        /// Image pixels per grid cell for bev-png.
        #[arg(long, default_value_t = 4)]
        scale: u32,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    BestIou,
    Input,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportKind {
    BevPng,
    GraphDot,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INPUT) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(CliError::Pipeline(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_PIPELINE)
        }
    }
}
