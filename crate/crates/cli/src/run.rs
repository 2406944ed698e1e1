use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use navharness_core::backend::{make_backend, Backend, BackendConfig};
use navharness_core::iteration::{
    first_student_prompt, read_runlog_file, run_iteration_loop, write_accuracy_csv, write_runlog, IterationConfig,
    RunLog,
};
use navharness_core::metrics::{summarize_run, write_summary, RunSummary};
use navharness_core::navsim::PlannerOptions;
use navharness_core::task::{load_tasks, Task};
use navharness_core::world::{load_world_file, WorldMap};
use navharness_service::{serve as start_service, ServiceConfig};

use crate::{EvaluateArgs, IterateArgs, RunArgs, ServeArgs};

fn load_backend(path: &Path) -> Result<Box<dyn Backend>> {
    let cfg = BackendConfig::from_file(path)?;
    make_backend(&cfg).with_context(|| format!("backend {}", path.display()))
}

fn load_inputs(run: &RunArgs) -> Result<(WorldMap, Vec<Task>)> {
    let map = load_world_file(&run.world).with_context(|| format!("world {}", run.world.display()))?;
    let tasks = load_tasks(&run.tasks).with_context(|| format!("tasks {}", run.tasks.display()))?;
    Ok((map, tasks))
}

fn config(run: &RunArgs, max_iter: u32, feedback_window: usize) -> IterationConfig {
    IterationConfig {
        run_id: run.run_id.clone(),
        max_iter,
        tolerance: run.tolerance,
        env_mode: run.env_mode,
        fine_tuned: run.fine_tuned,
        robot_speed: run.robot_speed,
        feedback_window,
        start: run.start,
        planner: PlannerOptions { inflation_radius_m: run.inflation_radius, ..PlannerOptions::default() },
        ..IterationConfig::default()
    }
}

/// Writes runlog.jsonl, metrics.json and accuracy.csv under `out`.
fn write_outputs(out: &Path, log: &RunLog) -> Result<RunSummary> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = BufWriter::new(File::create(out.join("runlog.jsonl"))?);
    write_runlog(&mut w, log)?;
    w.flush()?;

    let summary = summarize_run(log);
    let mut w = BufWriter::new(File::create(out.join("metrics.json"))?);
    write_summary(&mut w, &summary)?;
    w.write_all(b"\n")?;
    w.flush()?;

    let mut w = BufWriter::new(File::create(out.join("accuracy.csv"))?);
    write_accuracy_csv(&mut w, &log.accuracy)?;
    w.flush()?;
    Ok(summary)
}

fn na(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

fn print_summary(summary: &RunSummary) {
    for m in &summary.iterations {
        println!(
            "iteration {:>3}  SR {:.4}  NE {}  AT {}  MTR {}  tasks {}",
            m.iteration,
            m.metrics.sr,
            na(m.metrics.ne),
            na(m.metrics.at),
            na(m.metrics.mtr),
            m.metrics.n_tasks
        );
    }
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let (map, tasks) = load_inputs(&args.run)?;
    let student = load_backend(&args.run.student)?;
    let cfg = config(&args.run, 1, 0);
    let log = run_iteration_loop(&cfg, &tasks, &map, None, &*student)?;
    let summary = write_outputs(&args.run.out, &log)?;
    print_summary(&summary);
    Ok(())
}

pub fn iterate(args: IterateArgs) -> Result<()> {
    let (map, tasks) = load_inputs(&args.run)?;
    let cfg = config(&args.run, args.max_iter, args.feedback_window);
    if args.dry_run {
        match first_student_prompt(&cfg, &tasks, &map)? {
            Some(bundle) => {
                for m in &bundle.messages {
                    let role = serde_json::to_value(m.role)?;
                    println!("### {}\n{}\n", role.as_str().unwrap_or("?"), m.content);
                }
            }
            None => println!("(no tasks)"),
        }
        return Ok(());
    }
    let student = load_backend(&args.run.student)?;
    let teacher = load_backend(&args.teacher)?;
    let log = run_iteration_loop(&cfg, &tasks, &map, Some(&*teacher), &*student)?;
    let summary = write_outputs(&args.run.out, &log)?;
    print_summary(&summary);
    Ok(())
}

pub fn metrics(runlog: &Path, out: Option<&Path>) -> Result<()> {
    let log = read_runlog_file(runlog).with_context(|| format!("run log {}", runlog.display()))?;
    let summary = summarize_run(&log);
    let text = serde_json::to_string_pretty(&summary)?;
    println!("{text}");
    if let Some(out) = out {
        std::fs::write(out, format!("{text}\n")).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

pub fn serve(args: ServeArgs) -> Result<()> {
    let generator: Option<Arc<dyn Backend>> = match &args.generator {
        Some(path) => Some(Arc::from(load_backend(path)?)),
        None => None,
    };
    let mut cfg = ServiceConfig::new(&args.data_dir);
    cfg.host = args.host;
    cfg.port = args.port;
    cfg.world_files = args.worlds;
    cfg.generator = generator;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let handle = start_service(cfg).await?;
        println!("listening on {}", handle.url());
        tokio::signal::ctrl_c().await?;
        handle.shutdown().await?;
        Ok(())
    })
}
