//! `navharness`: evaluate and iterate navigation models, curate datasets,
//! compute metrics and run the HTTP service.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage error.

mod dataset;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use navharness_core::prompting::EnvMode;
use navharness_core::world::Point;

#[derive(Parser)]
#[command(name = "navharness", version, about = "Language-guided multi-point navigation harness")]
struct Cli {
    /// Seed for every random choice (dataset splits).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single pass over a task set, no teacher.
    Evaluate(EvaluateArgs),
    /// Teacher-student refinement loop.
    Iterate(IterateArgs),
    /// Metrics report from a run log.
    Metrics {
        #[arg(long)]
        runlog: PathBuf,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Headless dataset curation.
    #[command(subcommand)]
    Dataset(dataset::DatasetCommand),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args, Clone)]
pub struct RunArgs {
    #[arg(long)]
    world: PathBuf,
    #[arg(long)]
    tasks: PathBuf,
    /// Student backend config (JSON).
    #[arg(long)]
    student: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "run")]
    run_id: String,
    /// Success radius in meters.
    #[arg(long, default_value_t = 0.5)]
    tolerance: f64,
    /// full_map, landmarks_only or omitted.
    #[arg(long, default_value = "landmarks_only", value_parser = parse_env_mode)]
    env_mode: EnvMode,
    #[arg(long)]
    fine_tuned: bool,
    /// Meters per second.
    #[arg(long, default_value_t = 0.5)]
    robot_speed: f64,
    /// Robot start as `x,y`; defaults to the first free cell.
    #[arg(long, value_parser = parse_point)]
    start: Option<Point>,
    #[arg(long, default_value_t = 0.0)]
    inflation_radius: f64,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
pub struct IterateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Teacher backend config (JSON).
    #[arg(long)]
    teacher: PathBuf,
    #[arg(long, default_value_t = 10)]
    max_iter: u32,
    /// Past attempts per task shown to the teacher.
    #[arg(long, default_value_t = 3)]
    feedback_window: usize,
    /// Print the first student prompt and exit without calling any backend.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long)]
    data_dir: PathBuf,
    /// World files to serve (repeatable); `<data_dir>/maps/*.world` is also read.
    #[arg(long = "world")]
    worlds: Vec<PathBuf>,
    /// Generator backend config (JSON).
    #[arg(long)]
    generator: Option<PathBuf>,
}

fn parse_env_mode(s: &str) -> Result<EnvMode, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown env mode {s:?} (full_map, landmarks_only, omitted)"))
}

fn parse_point(s: &str) -> Result<Point, String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected x,y, got {s:?}"))?;
    let x: f64 = x.trim().parse().map_err(|e| format!("bad x: {e}"))?;
    let y: f64 = y.trim().parse().map_err(|e| format!("bad y: {e}"))?;
    Ok(Point::new(x, y))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    let result = match cli.command {
        Command::Evaluate(args) => run::evaluate(args),
        Command::Iterate(args) => run::iterate(args),
        Command::Metrics { runlog, out } => run::metrics(&runlog, out.as_deref()),
        Command::Dataset(cmd) => dataset::run(cmd, cli.seed),
        Command::Serve(args) => run::serve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
