use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CandidateTask, CurationSession, DatasetError, SessionStatus};
use crate::backend::ChatMessage;
use crate::output::ModelOutput;
use crate::prompting::{build_student_prompt, EnvMode, TeacherDirective};
use crate::task::{write_records, DifficultyBucket};
use crate::world::WorldMap;

/// Chat-format fine-tuning example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub id: String,
    pub messages: Vec<ChatMessage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportPaths {
    pub train: PathBuf,
    pub test: PathBuf,
    pub n_train: usize,
    pub n_test: usize,
}

fn training_record(c: &CandidateTask, map: &WorldMap) -> TrainingRecord {
    let bundle = build_student_prompt(&c.task, map, EnvMode::Omitted, &TeacherDirective::default(), true)
        .expect("omitted environment is allowed for fine-tuned students");
    let answer = ModelOutput { explanation: c.explanation.clone(), positions: c.task.goals.clone() };
    let mut messages = bundle.messages;
    messages.push(ChatMessage::assistant(answer.to_canonical()));
    TrainingRecord { id: c.task.id.clone(), messages }
}

/// Splits accepted tasks into train/test files, stratified by bucket.
/// Each bucket is shuffled with a seeded RNG and `round(n * test_fraction)`
/// of it goes to test.
pub fn export_dataset(
    session: &CurationSession,
    map: &WorldMap,
    out_dir: impl AsRef<Path>,
    test_fraction: f64,
    seed: u64,
) -> Result<ExportPaths, DatasetError> {
    session.check_map(map)?;
    session.expect_status(SessionStatus::Complete)?;
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DatasetError::BadTestFraction(test_fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for bucket in DifficultyBucket::ALL {
        let mut members: Vec<&CandidateTask> =
            session.accepted_candidates().into_iter().filter(|c| c.task.difficulty_bucket == bucket).collect();
        members.shuffle(&mut rng);
        let n_test = (members.len() as f64 * test_fraction).round() as usize;
        let (t, r) = members.split_at(n_test);
        test.extend_from_slice(t);
        train.extend_from_slice(r);
    }

    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    let train_path = out_dir.join(format!("{}.train.jsonl", session.session_id));
    let test_path = out_dir.join(format!("{}.test.jsonl", session.session_id));

    let mut w = BufWriter::new(File::create(&train_path)?);
    for c in &train {
        serde_json::to_writer(&mut w, &training_record(c, map)).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;

    let records: Vec<_> = test.iter().map(|c| c.task.to_record(c.score, c.generation_round)).collect();
    let mut w = BufWriter::new(File::create(&test_path)?);
    write_records(&mut w, &records)?;
    w.flush()?;

    Ok(ExportPaths { train: train_path, test: test_path, n_train: train.len(), n_test: test.len() })
}
