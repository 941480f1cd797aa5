//! Command-line entry points: data collection, training, planning, preset
//! runs, reports and the live steering service.

pub mod commands;
pub mod report;
pub mod serve;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use softarm_control::ControllerKind;

#[derive(Debug, Parser)]
#[command(name = "softarm", version, about = "Soft-arm planning and control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Babble the simulated plant and record a dataset.
    Collect(CollectArgs),
    /// Train the forward model and the learned controller.
    Train(TrainArgs),
    /// Plan an offline configuration trajectory.
    Plan(PlanArgs),
    /// Run a preset in closed loop and report its errors.
    Run(RunArgs),
    /// Tabulate trajectory logs.
    Report(ReportArgs),
    /// Serve a live session over WebSocket.
    Serve(ServeArgs),
    /// List the experiment presets.
    Presets,
}

#[derive(Debug, Clone, Args)]
pub struct GeomArgs {
    /// Arm geometry as JSON; the default arm if omitted.
    #[arg(long)]
    pub geom: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CollectArgs {
    #[arg(long, default_value_t = 9000)]
    pub samples: usize,
    /// Seed of the babbling walk.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seed of the plant disturbances.
    #[arg(long, default_value_t = 1)]
    pub plant_seed: u64,
    #[command(flatten)]
    pub geom: GeomArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Directory for c2s.bin, c2a.bin and the learning curves.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Directory holding c2s.bin and c2a.bin.
    #[arg(long, default_value = "models")]
    pub model: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    #[arg(long, conflicts_with = "task")]
    pub preset: Option<String>,
    /// Task as JSON.
    #[arg(long)]
    pub task: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub geom: GeomArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub preset: String,
    /// Controller; the preset's choice if omitted.
    #[arg(long)]
    pub controller: Option<ControllerKind>,
    /// Plant seeds; the preset's seeds if omitted.
    #[arg(long = "seed", num_args = 1..)]
    pub seeds: Vec<u64>,
    /// Override the preset's tick count.
    #[arg(long)]
    pub ticks: Option<usize>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub geom: GeomArgs,
    /// Directory for the trajectory logs and the report.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Trajectory log files.
    pub logs: Vec<PathBuf>,
    /// Write per-tick error series as CSV into this directory.
    #[arg(long)]
    pub series: Option<PathBuf>,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8765")]
    pub addr: String,
    /// Starting task: an online preset.
    #[arg(long, default_value = "online-follow", conflicts_with = "task")]
    pub preset: String,
    /// Starting task as JSON.
    #[arg(long)]
    pub task: Option<PathBuf>,
    #[arg(long, default_value = "nn")]
    pub controller: ControllerKind,
    #[arg(long, default_value_t = 1001)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub tick_ms: u64,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub geom: GeomArgs,
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Collect(a) => commands::collect(&a),
        Command::Train(a) => commands::train(&a),
        Command::Plan(a) => commands::plan(&a),
        Command::Run(a) => commands::run(&a),
        Command::Report(a) => commands::report(&a),
        Command::Serve(a) => serve::serve_blocking(&a),
        Command::Presets => {
            commands::list_presets();
            Ok(())
        }
    }
}
