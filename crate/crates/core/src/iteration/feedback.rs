use std::collections::HashMap;

use thiserror::Error;

use super::AttemptRecord;

#[derive(Debug, Error, PartialEq)]
#[error("task {task_id:?}: iteration {got} after iteration {last}")]
pub struct IterationRegression {
    pub task_id: String,
    pub last: u32,
    pub got: u32,
}

/// Append-only attempt history, indexed by task id.
#[derive(Debug, Clone, Default)]
pub struct FeedbackStore {
    records: Vec<AttemptRecord>,
    by_task: HashMap<String, Vec<usize>>,
}

/// The most recent attempts for one task, oldest first.
#[derive(Debug, Clone, Default)]
pub struct FeedbackWindow<'a> {
    pub records: Vec<&'a AttemptRecord>,
}

impl FeedbackStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[AttemptRecord] {
        &self.records
    }

    pub fn last_iteration(&self, task_id: &str) -> Option<u32> {
        self.by_task.get(task_id).and_then(|ix| ix.last()).map(|&i| self.records[i].iteration)
    }

    pub fn update_feedback(&mut self, record: AttemptRecord) -> Result<(), IterationRegression> {
        if let Some(last) = self.last_iteration(&record.task_id) {
            if record.iteration < last {
                return Err(IterationRegression { task_id: record.task_id, last, got: record.iteration });
            }
        }
        self.by_task.entry(record.task_id.clone()).or_default().push(self.records.len());
        self.records.push(record);
        Ok(())
    }

    pub fn read_feedback(&self, task_id: &str, k: usize) -> FeedbackWindow<'_> {
        let indices = self.by_task.get(task_id).map(Vec::as_slice).unwrap_or(&[]);
        let skip = indices.len().saturating_sub(k);
        FeedbackWindow { records: indices[skip..].iter().map(|&i| &self.records[i]).collect() }
    }
}
