use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Subcommand;
use navharness_core::dataset::{
    export_dataset, generate_candidates, ingest_scores, CurationSession, SessionStore, DEFAULT_THRESHOLD,
};
use navharness_core::task::load_tasks;
use navharness_core::world::{load_world_file, WorldMap};
use serde::Deserialize;

use crate::ServeArgs;

#[derive(Subcommand)]
pub enum DatasetCommand {
    /// Start a curation session.
    Create {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        target_total: usize,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        /// Example tasks shown to the generator (JSONL).
        #[arg(long)]
        seeds: Option<PathBuf>,
        #[arg(long)]
        session: String,
    },
    /// Run one generation round.
    Generate {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        session: String,
        /// Generator backend config (JSON).
        #[arg(long)]
        generator: PathBuf,
        #[arg(long, default_value_t = 10)]
        batch: usize,
    },
    /// Submit scores from a file of `{"candidate_id", "score"}` lines.
    Score {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        session: String,
        #[arg(long)]
        scores: PathBuf,
    },
    /// Write train/test files for a complete session.
    Export {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        session: String,
        #[arg(long, default_value_t = 0.25)]
        test_fraction: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a session summary.
    Status {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        session: String,
    },
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Deserialize)]
struct ScoreLine {
    candidate_id: String,
    score: f64,
}

#[derive(Deserialize)]
struct ScoreDoc {
    scores: Vec<ScoreLine>,
}

fn read_scores(path: &Path) -> Result<Vec<(String, f64)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(doc) = serde_json::from_str::<ScoreDoc>(&text) {
        return Ok(doc.scores.into_iter().map(|s| (s.candidate_id, s.score)).collect());
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let s: ScoreLine = serde_json::from_str(line).with_context(|| format!("{} line {}", path.display(), i + 1))?;
        out.push((s.candidate_id, s.score));
    }
    Ok(out)
}

fn open(data_dir: &Path, world: &Path, id: &str) -> Result<(SessionStore, WorldMap, CurationSession)> {
    let store = SessionStore::open(data_dir)?;
    let map = load_world_file(world).with_context(|| format!("world {}", world.display()))?;
    let session = store.load(id)?;
    if session.map_id != map.id() {
        bail!("session {id:?} uses map {:?}, not {:?}", session.map_id, map.id());
    }
    Ok((store, map, session))
}

fn print_summary(session: &CurationSession) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(&session.summary())?);
    Ok(())
}

pub fn run(cmd: DatasetCommand, seed: u64) -> Result<()> {
    match cmd {
        DatasetCommand::Create { data_dir, world, target_total, threshold, seeds, session } => {
            let store = SessionStore::open(&data_dir)?;
            if store.exists(&session) {
                bail!("session {session:?} already exists");
            }
            let map = load_world_file(&world).with_context(|| format!("world {}", world.display()))?;
            let seeds = match seeds {
                Some(path) => load_tasks(&path).with_context(|| format!("seeds {}", path.display()))?,
                None => vec![],
            };
            let s = CurationSession::new(session, &map, target_total, threshold, seeds)?;
            store.save(&s)?;
            print_summary(&s)
        }
        DatasetCommand::Generate { data_dir, world, session, generator, batch } => {
            let (store, map, mut s) = open(&data_dir, &world, &session)?;
            let backend = navharness_core::backend::make_backend(
                &navharness_core::backend::BackendConfig::from_file(&generator)?,
            )?;
            let report = generate_candidates(&mut s, &map, &*backend, batch)?;
            store.save(&s)?;
            for id in &report.candidate_ids {
                let c = s.candidate(id).expect("just generated");
                println!("{id}\t{}\t{}", c.task.num_goals, c.task.text);
            }
            eprintln!("round {}: {} candidates, {} dropped", report.round, report.candidate_ids.len(), report.dropped);
            Ok(())
        }
        DatasetCommand::Score { data_dir, world, session, scores } => {
            let (store, map, mut s) = open(&data_dir, &world, &session)?;
            let scores = read_scores(&scores)?;
            ingest_scores(&mut s, &map, &scores)?;
            store.save(&s)?;
            print_summary(&s)
        }
        DatasetCommand::Export { data_dir, world, session, test_fraction, out } => {
            let (_, map, s) = open(&data_dir, &world, &session)?;
            let paths = export_dataset(&s, &map, &out, test_fraction, seed)?;
            println!("{}", serde_json::to_string_pretty(&paths)?);
            Ok(())
        }
        DatasetCommand::Status { data_dir, session } => {
            let store = SessionStore::open(&data_dir)?;
            print_summary(&store.load(&session)?)
        }
        DatasetCommand::Serve(args) => crate::run::serve(args),
    }
}
