//! `vilad`: one binary for annotation, distillation, planning, simulation,
//! metrics, the live server and the end-to-end demo.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Annotate(#[from] vilad_core::annotate::AnnotateError),
    #[error(transparent)]
    Distill(#[from] vilad_core::distill::DistillError),
    #[error(transparent)]
    Sim(#[from] vilad_core::sim::SimError),
    #[error(transparent)]
    Metrics(#[from] vilad_core::metrics::MetricsError),
    #[error(transparent)]
    Pipeline(#[from] vilad_core::pipeline::PipelineError),
    #[error(transparent)]
    Costmap(#[from] vilad_core::costmap::CostmapError),
    #[error(transparent)]
    Server(#[from] vilad_server::ServerError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Parser)]
#[command(
    name = "vilad",
    version,
    about = "Attention distillation and attention-costmap navigation at desk scale"
)]
pub struct Cli {
    /// TOML or JSON config file layered over the defaults.
    #[arg(long, global = true, env = "VILAD_CONFIG")]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config file.
    #[arg(long, global = true, env = "VILAD_SEED")]
    pub seed: Option<u64>,
    /// Log filter (error, warn, info, debug, trace).
    #[arg(long, global = true, env = "VILAD_LOG", default_value = "warn")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an annotated dataset with the mock or remote oracle.
    Annotate(AnnotateArgs),
    /// Train LoRA adapters on one or more annotated datasets.
    Distill(DistillArgs),
    /// Run an episode to a given time and dump the next planning step.
    Plan(PlanArgs),
    /// Simulation commands.
    Sim {
        #[command(subcommand)]
        command: SimCommand,
    },
    /// Evaluation commands.
    Metrics {
        #[command(subcommand)]
        command: MetricsCommand,
    },
    /// Run an episode behind the WebSocket server.
    Serve(ServeArgs),
    /// End-to-end runs.
    Pipeline {
        #[command(subcommand)]
        command: PipelineCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum SimCommand {
    /// Run trials and write episode JSON and trajectory CSV files.
    Run(SimRunArgs),
}

#[derive(Debug, Subcommand)]
pub enum MetricsCommand {
    /// Tabulate success rate, time to goal and Frechet distance.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum PipelineCommand {
    /// Annotate (mock) -> distill -> simulate -> report on the bundled scenarios.
    Demo(DemoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OracleKind {
    Mock,
    Remote,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["scenario", "images"])))]
pub struct AnnotateArgs {
    /// Scenario file or bundled id (scen1..scen4) to replay for frames.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Directory of PNG frames (remote oracle only).
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "mock")]
    pub oracle: OracleKind,
    /// Records to annotate.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    /// Prior frames per record; defaults to the model config.
    #[arg(long)]
    pub history: Option<usize>,
    /// Prompt template JSON (`system`, `user`, `output_schema`).
    #[arg(long)]
    pub template: Option<PathBuf>,
    /// Remote endpoint; overrides the config.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DistillArgs {
    /// Dataset directory; repeat to combine datasets.
    #[arg(long = "data", required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Weight of the VLM term in [0, 1].
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub scenario: String,
    #[arg(long, default_value = "synth:ground_truth_social")]
    pub policy: String,
    /// Sim time to advance to before planning, s.
    #[arg(long, default_value_t = 0.0)]
    pub at: f64,
    /// Candidates to list.
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimRunArgs {
    #[arg(long)]
    pub scenario: String,
    /// teleop, goal_only, synth:ground_truth_social, synth:pretrained_like or vilad:<model file>.
    #[arg(long)]
    pub policy: String,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding episode JSON files (searched recursively).
    #[arg(long)]
    pub runs: PathBuf,
    /// Reference directory: `<scenario>.csv` or `<scenario>/*.csv` (newest wins).
    /// Bundled scripted references are used when omitted.
    #[arg(long)]
    pub refs: Option<PathBuf>,
    /// CSV table path; an aligned text table is written beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub scenario: String,
    #[arg(long, default_value = "teleop")]
    pub policy: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Where teleop recordings are written.
    #[arg(long, default_value = "recordings")]
    pub record_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // help and version exit 0, usage errors 2
        Err(e) => e.exit(),
    };
    env_logger::Builder::new().parse_filters(&cli.log).init();
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
