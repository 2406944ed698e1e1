//! Navigation tasks and their line-delimited record format.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifficultyBucket {
    One,
    Two,
    Three,
    FourPlus,
}

impl DifficultyBucket {
    pub const ALL: [DifficultyBucket; 4] =
        [DifficultyBucket::One, DifficultyBucket::Two, DifficultyBucket::Three, DifficultyBucket::FourPlus];

    pub fn for_goal_count(n: usize) -> Option<Self> {
        match n {
            0 => None,
            1 => Some(Self::One),
            2 => Some(Self::Two),
            3 => Some(Self::Three),
            _ => Some(Self::FourPlus),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::One => "one",
            Self::Two => "two",
            Self::Three => "three",
            Self::FourPlus => "four_plus",
        }
    }

    /// Human wording of the goal count, for generation prompts.
    pub fn describe(self) -> &'static str {
        match self {
            Self::One => "exactly 1 goal point",
            Self::Two => "exactly 2 goal points",
            Self::Three => "exactly 3 goal points",
            Self::FourPlus => "4 or more goal points",
        }
    }
}

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("task {0:?} has no goals")]
    NoGoals(String),
    #[error("task {id:?}: num_goals {declared} does not match {actual} goals")]
    GoalCountMismatch { id: String, declared: usize, actual: usize },
    #[error("task {0:?} has a non-finite goal")]
    NonFiniteGoal(String),
    #[error("line {line}: {reason}")]
    BadRecord { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An instruction with its ground-truth ordered goal list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub text: String,
    pub map_id: String,
    pub goals: Vec<Point>,
    pub num_goals: usize,
    pub difficulty_bucket: DifficultyBucket,
}

impl Task {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        map_id: impl Into<String>,
        goals: Vec<Point>,
    ) -> Result<Self, TaskError> {
        let id = id.into();
        let difficulty_bucket =
            DifficultyBucket::for_goal_count(goals.len()).ok_or_else(|| TaskError::NoGoals(id.clone()))?;
        if goals.iter().any(|g| !g.is_finite()) {
            return Err(TaskError::NonFiniteGoal(id));
        }
        Ok(Self { num_goals: goals.len(), id, text: text.into(), map_id: map_id.into(), goals, difficulty_bucket })
    }

    pub fn to_record(&self, score: Option<f64>, round: u32) -> TaskRecord {
        TaskRecord {
            id: self.id.clone(),
            task: self.text.clone(),
            num_goals: self.num_goals,
            map_id: self.map_id.clone(),
            goals: self.goals.clone(),
            score,
            round,
        }
    }
}

/// One line of a task/dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: String,
    pub task: String,
    pub num_goals: usize,
    pub map_id: String,
    pub goals: Vec<Point>,
    #[serde(default)]
    pub score: Option<f64>,
    #[serde(default)]
    pub round: u32,
}

impl TryFrom<TaskRecord> for Task {
    type Error = TaskError;

    fn try_from(rec: TaskRecord) -> Result<Self, TaskError> {
        if rec.num_goals != rec.goals.len() {
            return Err(TaskError::GoalCountMismatch {
                id: rec.id,
                declared: rec.num_goals,
                actual: rec.goals.len(),
            });
        }
        Task::new(rec.id, rec.task, rec.map_id, rec.goals)
    }
}

pub fn read_tasks(reader: impl BufRead) -> Result<Vec<Task>, TaskError> {
    let mut tasks = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TaskRecord = serde_json::from_str(&line)
            .map_err(|e| TaskError::BadRecord { line: i + 1, reason: e.to_string() })?;
        tasks.push(
            Task::try_from(rec).map_err(|e| TaskError::BadRecord { line: i + 1, reason: e.to_string() })?,
        );
    }
    Ok(tasks)
}

pub fn load_tasks(path: impl AsRef<Path>) -> Result<Vec<Task>, TaskError> {
    let file = std::fs::File::open(path)?;
    read_tasks(std::io::BufReader::new(file))
}

pub fn write_records<'a>(
    mut out: impl Write,
    records: impl IntoIterator<Item = &'a TaskRecord>,
) -> std::io::Result<()> {
    for rec in records {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buckets() {
        assert_eq!(DifficultyBucket::for_goal_count(0), None);
        assert_eq!(DifficultyBucket::for_goal_count(3), Some(DifficultyBucket::Three));
        assert_eq!(DifficultyBucket::for_goal_count(9), Some(DifficultyBucket::FourPlus));
    }

    #[test]
    fn reads_records_and_checks_counts() {
        let text = concat!(
            r#"{"id":"a","task":"go","num_goals":1,"map_id":"m","goals":[[1,2]],"score":null,"round":0}"#,
            "\n\n",
            r#"{"id":"b","task":"go","num_goals":2,"map_id":"m","goals":[[1,2],[3,4]]}"#,
            "\n"
        );
        let tasks = read_tasks(text.as_bytes()).unwrap();
        assert_eq!(tasks.len(), 2);
        assert_eq!(tasks[1].difficulty_bucket, DifficultyBucket::Two);

        let bad = r#"{"id":"a","task":"go","num_goals":3,"map_id":"m","goals":[[1,2]]}"#;
        assert!(matches!(read_tasks(bad.as_bytes()), Err(TaskError::BadRecord { line: 1, .. })));
        let empty = r#"{"id":"a","task":"go","num_goals":0,"map_id":"m","goals":[]}"#;
        assert!(read_tasks(empty.as_bytes()).is_err());
    }
}
