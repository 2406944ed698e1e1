//! Teacher-student iteration: each round, every task gets a teacher
//! directive built from its recent feedback, a student answer, a simulated
//! navigation run and a success judgement that is appended to the feedback
//! store.

mod feedback;
mod judge;
mod runlog;

pub use feedback::{FeedbackStore, FeedbackWindow, IterationRegression};
pub use judge::{judge_success, Judgement};
pub use runlog::{read_runlog, read_runlog_file, write_accuracy_csv, write_runlog, RunHeader, RunLogError};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tracing::{debug, info, warn};

use crate::backend::{Backend, ChatMessage, CompletionRequest};
use crate::metrics::success_rate;
use crate::navsim::{execute_goals_with, Occupancy, PlannerOptions};
use crate::output::{parse_model_output, validate_positions, ModelOutput, ValidationOptions};
use crate::prompting::{
    build_student_prompt, build_teacher_prompt, parse_teacher_directive, template_version, EnvMode,
    PromptBundle, TeacherDirective,
};
use crate::task::Task;
use crate::world::{Point, WorldMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseOutcome {
    Ok(ModelOutput),
    Error(String),
}

impl ParseOutcome {
    pub fn output(&self) -> Option<&ModelOutput> {
        match self {
            ParseOutcome::Ok(out) => Some(out),
            ParseOutcome::Error(_) => None,
        }
    }
}

/// One student attempt at one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub iteration: u32,
    pub task_id: String,
    /// SHA-256 of the student messages.
    pub prompt_digest: String,
    pub raw_output: String,
    pub parsed: ParseOutcome,
    pub success: bool,
    pub ne: Option<f64>,
    /// Student inference seconds.
    pub inference_duration: f64,
    /// Simulated motion seconds.
    pub motion_duration: f64,
    /// Student inference plus motion; teacher time is excluded.
    pub total_duration: f64,
    #[serde(default)]
    pub teacher_duration: Option<f64>,
    #[serde(default)]
    pub completion_tokens: Option<u64>,
    #[serde(default)]
    pub hints: Vec<String>,
    #[serde(default)]
    pub directive_degraded: bool,
    #[serde(default)]
    pub reached: Option<bool>,
    #[serde(default)]
    pub error: Option<String>,
}

impl AttemptRecord {
    /// A failed attempt with no output, for tests and error paths.
    pub fn empty(iteration: u32, task_id: impl Into<String>) -> Self {
        Self {
            iteration,
            task_id: task_id.into(),
            prompt_digest: String::new(),
            raw_output: String::new(),
            parsed: ParseOutcome::Error("no output".into()),
            success: false,
            ne: None,
            inference_duration: 0.0,
            motion_duration: 0.0,
            total_duration: 0.0,
            teacher_duration: None,
            completion_tokens: None,
            hints: Vec::new(),
            directive_degraded: false,
            reached: None,
            error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IterationConfig {
    pub run_id: String,
    pub max_iter: u32,
    /// Success radius in meters.
    pub tolerance: f64,
    pub env_mode: EnvMode,
    pub fine_tuned: bool,
    /// Meters per second.
    pub robot_speed: f64,
    /// Attempts per task shown to the teacher.
    pub feedback_window: usize,
    /// Robot start for every task; defaults to the first free cell's center.
    pub start: Option<Point>,
    pub validation: ValidationOptions,
    pub planner: PlannerOptions,
}

impl Default for IterationConfig {
    fn default() -> Self {
        Self {
            run_id: "run".to_string(),
            max_iter: 10,
            tolerance: 0.5,
            env_mode: EnvMode::LandmarksOnly,
            fine_tuned: false,
            robot_speed: 0.5,
            feedback_window: 3,
            start: None,
            validation: ValidationOptions::default(),
            planner: PlannerOptions::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum IterationError {
    #[error("invalid iteration config: {0}")]
    InvalidConfig(String),
    #[error("task {task:?} references map {task_map:?}, but the loaded map is {map:?}")]
    MapMismatch { task: String, task_map: String, map: String },
    #[error("start point {0} is not on a free cell")]
    BadStart(Point),
}

impl IterationConfig {
    pub fn validate(&self) -> Result<(), IterationError> {
        let bad = |m: &str| Err(IterationError::InvalidConfig(m.to_string()));
        if self.max_iter < 1 {
            return bad("max_iter must be at least 1");
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return bad("tolerance must be positive");
        }
        if !(self.robot_speed > 0.0 && self.robot_speed.is_finite()) {
            return bad("robot_speed must be positive");
        }
        if self.env_mode == EnvMode::Omitted && !self.fine_tuned {
            return bad("env_mode omitted requires a fine-tuned student");
        }
        if self.planner.inflation_radius_m.is_nan() || self.planner.inflation_radius_m < 0.0 {
            return bad("inflation radius must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyPoint {
    pub iteration: u32,
    pub sr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub header: RunHeader,
    pub attempts: Vec<AttemptRecord>,
    pub accuracy: Vec<AccuracyPoint>,
}

impl RunLog {
    pub fn attempts_in(&self, iteration: u32) -> impl Iterator<Item = &AttemptRecord> {
        self.attempts.iter().filter(move |a| a.iteration == iteration)
    }
}

pub fn prompt_digest(messages: &[ChatMessage]) -> String {
    let bytes = serde_json::to_vec(messages).expect("messages serialize");
    format!("{:x}", Sha256::digest(&bytes))
}

/// Robot start: configured point, or the center of the first free cell.
pub fn start_point(cfg: &IterationConfig, map: &WorldMap) -> Result<Point, IterationError> {
    match cfg.start {
        Some(p) => match map.world_to_cell(p) {
            Ok(cell) if !map.is_occupied(cell) => Ok(p),
            _ => Err(IterationError::BadStart(p)),
        },
        None => Ok(map.cell_center(map.free_cells().next().expect("maps have a free cell"))),
    }
}

/// First student prompt of a run, as sent before any teacher involvement.
pub fn first_student_prompt(
    cfg: &IterationConfig,
    tasks: &[Task],
    map: &WorldMap,
) -> Result<Option<PromptBundle>, IterationError> {
    cfg.validate()?;
    let Some(task) = tasks.first() else { return Ok(None) };
    let bundle = build_student_prompt(task, map, cfg.env_mode, &TeacherDirective::default(), cfg.fine_tuned)
        .map_err(|e| IterationError::InvalidConfig(e.to_string()))?;
    Ok(Some(bundle))
}

pub fn run_iteration_loop(
    cfg: &IterationConfig,
    tasks: &[Task],
    map: &WorldMap,
    teacher: Option<&dyn Backend>,
    student: &dyn Backend,
) -> Result<RunLog, IterationError> {
    let mut store = FeedbackStore::new();
    run_iteration_loop_with_store(cfg, tasks, map, teacher, student, &mut store)
}

/// Runs iterations `1..=max_iter`, appending every attempt to `store`.
/// The returned log holds only this run's attempts.
pub fn run_iteration_loop_with_store(
    cfg: &IterationConfig,
    tasks: &[Task],
    map: &WorldMap,
    teacher: Option<&dyn Backend>,
    student: &dyn Backend,
    store: &mut FeedbackStore,
) -> Result<RunLog, IterationError> {
    cfg.validate()?;
    if let Some(task) = tasks.iter().find(|t| t.map_id != map.id()) {
        return Err(IterationError::MapMismatch {
            task: task.id.clone(),
            task_map: task.map_id.clone(),
            map: map.id().to_string(),
        });
    }
    let start = start_point(cfg, map)?;
    let occupancy = Occupancy::new(map, &cfg.planner);
    let first_iteration = tasks.iter().filter_map(|t| store.last_iteration(&t.id)).max().unwrap_or(0) + 1;

    let header = RunHeader {
        run_id: cfg.run_id.clone(),
        config: cfg.clone(),
        template_version: template_version(),
        student: student.id().to_string(),
        teacher: teacher.map(|t| t.id().to_string()),
        map_id: map.id().to_string(),
        n_tasks: tasks.len(),
    };
    let mut attempts = Vec::new();
    let mut accuracy = Vec::new();

    for iteration in first_iteration..first_iteration + cfg.max_iter {
        let mut flags = Vec::with_capacity(tasks.len());
        for task in tasks {
            let record = attempt_task(cfg, iteration, task, map, &occupancy, start, teacher, student, store);
            debug!(iteration, task = %task.id, success = record.success, "attempt finished");
            flags.push(record.success);
            attempts.push(record.clone());
            store.update_feedback(record).expect("iterations increase monotonically");
        }
        if tasks.is_empty() {
            warn!(iteration, "success rate over zero tasks reported as 0");
        }
        let sr = success_rate(&flags);
        info!(iteration, sr, "iteration finished");
        accuracy.push(AccuracyPoint { iteration, sr });
    }
    Ok(RunLog { header, attempts, accuracy })
}

#[allow(clippy::too_many_arguments)]
fn attempt_task(
    cfg: &IterationConfig,
    iteration: u32,
    task: &Task,
    map: &WorldMap,
    occupancy: &Occupancy<'_>,
    start: Point,
    teacher: Option<&dyn Backend>,
    student: &dyn Backend,
    store: &FeedbackStore,
) -> AttemptRecord {
    let mut record = AttemptRecord::empty(iteration, task.id.clone());

    let mut directive = TeacherDirective::default();
    if let Some(teacher) = teacher {
        let window = store.read_feedback(&task.id, cfg.feedback_window);
        let bundle = build_teacher_prompt(task, &window);
        let req = CompletionRequest::with_defaults(bundle.messages, teacher.defaults());
        match teacher.complete(&req) {
            Ok(resp) => {
                let parsed = parse_teacher_directive(&resp.text);
                record.teacher_duration = Some(resp.inference_duration);
                record.directive_degraded = parsed.degraded;
                directive = parsed.directive;
            }
            Err(e) => {
                warn!(task = %task.id, error = %e, "teacher failed; continuing without hints");
                record.error = Some(format!("teacher: {e}"));
            }
        }
    }
    record.hints = directive.hints.clone();

    let bundle = build_student_prompt(task, map, cfg.env_mode, &directive, cfg.fine_tuned)
        .expect("config validated env mode");
    record.prompt_digest = prompt_digest(&bundle.messages);
    let req = CompletionRequest::with_defaults(bundle.messages, student.defaults());
    let resp = match student.complete(&req) {
        Ok(resp) => resp,
        Err(e) => {
            record.parsed = ParseOutcome::Error(format!("student backend: {e}"));
            record.error = Some(format!("student: {e}"));
            return record;
        }
    };
    record.raw_output = resp.text;
    record.inference_duration = resp.inference_duration;
    record.completion_tokens = resp.completion_tokens;

    match parse_model_output(&record.raw_output) {
        Ok((output, _diag)) => {
            let judgement = judge_success(&output.positions, &task.goals, cfg.tolerance);
            record.ne = judgement.ne;
            match validate_positions(&output, map, cfg.validation) {
                Ok(goals) => {
                    let outcome = execute_goals_with(occupancy, start, &goals, cfg.robot_speed);
                    record.motion_duration = outcome.motion_duration;
                    record.reached = Some(outcome.all_reached);
                    record.success = judgement.success;
                }
                Err(e) => record.error = Some(format!("invalid positions: {e}")),
            }
            record.parsed = ParseOutcome::Ok(output);
        }
        Err(e) => record.parsed = ParseOutcome::Error(e.to_string()),
    }
    record.total_duration = record.inference_duration + record.motion_duration;
    record
}
