//! Human-in-the-loop task curation: a generator model proposes tasks, a
//! human scores them, and the scored pairs condition the next round until
//! every difficulty bucket reaches its target.

mod export;
mod ratio;
mod store;

pub use export::{export_dataset, ExportPaths, TrainingRecord};
pub use ratio::{allocate_ratio, BucketCounts, BUCKET_WEIGHTS};
pub use store::{SessionStore, StoreError};

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::backend::{Backend, BackendError, ChatMessage, CompletionRequest};
use crate::extract::extract_object;
use crate::output::parse_positions;
use crate::prompting::{fmt_points, render_landmarks, templates};
use crate::task::{DifficultyBucket, Task};
use crate::world::{Point, WorldMap};

pub const DEFAULT_THRESHOLD: f64 = 7.0;
pub const SCORE_MAX: f64 = 10.0;
/// Scored examples included in a generation prompt.
pub const FEEDBACK_CAP: usize = 50;
/// Max distance between a goal and the landmark it names.
pub const LANDMARK_EPS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("target total {0} is below the minimum of 7")]
    TotalTooSmall(usize),
    #[error("threshold {0} is outside [0, 10]")]
    BadThreshold(f64),
    #[error("session {session:?} is {status:?}; expected {expected:?}")]
    WrongStatus { session: String, status: SessionStatus, expected: SessionStatus },
    #[error("all bucket targets are already met")]
    TargetsMet,
    #[error("batch size must be positive")]
    EmptyBatch,
    #[error("generator produced no usable candidates ({dropped} dropped)")]
    NoCandidates { dropped: usize },
    #[error("generator: {0}")]
    Backend(#[from] BackendError),
    #[error("unknown candidate {0:?}")]
    UnknownCandidate(String),
    #[error("candidate {0:?} is not pending or was scored twice")]
    DuplicateScore(String),
    #[error("score {score} for {candidate:?} is outside [0, 10]")]
    ScoreOutOfRange { candidate: String, score: f64 },
    #[error("map {got:?} does not match session map {expected:?}")]
    MapMismatch { expected: String, got: String },
    #[error("test fraction {0} must lie strictly between 0 and 1")]
    BadTestFraction(f64),
    #[error("invalid session id {0:?}")]
    BadSessionId(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Collecting,
    Scoring,
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Seed,
    Generated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateStatus {
    Pending,
    Accepted,
    Rejected,
    /// Scored above threshold but its bucket was already full.
    Spare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTask {
    #[serde(flatten)]
    pub task: Task,
    pub explanation: String,
    pub score: Option<f64>,
    pub generation_round: u32,
    pub provenance: Provenance,
    pub status: CandidateStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CandidateTask {
    pub fn id(&self) -> &str {
        &self.task.id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredExample {
    pub candidate_id: String,
    pub task: String,
    pub num_goals: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub candidate_ids: Vec<String>,
    pub dropped: usize,
    pub scores: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationSession {
    pub session_id: String,
    pub map_id: String,
    pub target_total: usize,
    pub bucket_targets: BucketCounts,
    pub threshold: f64,
    pub status: SessionStatus,
    pub round: u32,
    /// Hand-written example tasks shown to the generator.
    pub seeds: Vec<CandidateTask>,
    /// Every generated candidate, in generation order.
    pub candidates: Vec<CandidateTask>,
    /// Accepted candidate ids, in acceptance order.
    pub accepted: Vec<String>,
    pub rounds: Vec<RoundRecord>,
    /// All (task, score) pairs, oldest first.
    pub feedback: Vec<ScoredExample>,
}

pub fn valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl CurationSession {
    pub fn new(
        session_id: impl Into<String>,
        map: &WorldMap,
        target_total: usize,
        threshold: f64,
        seeds: Vec<Task>,
    ) -> Result<Self, DatasetError> {
        let session_id = session_id.into();
        if !valid_session_id(&session_id) {
            return Err(DatasetError::BadSessionId(session_id));
        }
        if !(0.0..=SCORE_MAX).contains(&threshold) {
            return Err(DatasetError::BadThreshold(threshold));
        }
        let bucket_targets = allocate_ratio(target_total)?;
        let seeds = seeds
            .into_iter()
            .map(|task| CandidateTask {
                explanation: default_explanation(map, &task.goals),
                task,
                score: None,
                generation_round: 0,
                provenance: Provenance::Seed,
                status: CandidateStatus::Pending,
                note: None,
            })
            .collect();
        Ok(Self {
            session_id,
            map_id: map.id().to_string(),
            target_total,
            bucket_targets,
            threshold,
            status: SessionStatus::Collecting,
            round: 0,
            seeds,
            candidates: Vec::new(),
            accepted: Vec::new(),
            rounds: Vec::new(),
            feedback: Vec::new(),
        })
    }

    pub fn candidate(&self, id: &str) -> Option<&CandidateTask> {
        self.candidates.iter().find(|c| c.id() == id)
    }

    pub fn accepted_candidates(&self) -> Vec<&CandidateTask> {
        self.accepted.iter().filter_map(|id| self.candidate(id)).collect()
    }

    pub fn accepted_counts(&self) -> BucketCounts {
        let mut counts = [0usize; 4];
        for c in self.accepted_candidates() {
            counts[c.task.difficulty_bucket.index()] += 1;
        }
        BucketCounts::from_array(counts)
    }

    /// Remaining capacity per bucket.
    pub fn unmet(&self) -> BucketCounts {
        let targets = self.bucket_targets.to_array();
        let accepted = self.accepted_counts().to_array();
        BucketCounts::from_array(std::array::from_fn(|i| targets[i].saturating_sub(accepted[i])))
    }

    pub fn targets_met(&self) -> bool {
        self.unmet().total() == 0
    }

    pub fn pending(&self) -> impl Iterator<Item = &CandidateTask> {
        self.candidates.iter().filter(|c| c.status == CandidateStatus::Pending)
    }

    fn check_map(&self, map: &WorldMap) -> Result<(), DatasetError> {
        if map.id() != self.map_id {
            return Err(DatasetError::MapMismatch { expected: self.map_id.clone(), got: map.id().to_string() });
        }
        Ok(())
    }

    fn expect_status(&self, expected: SessionStatus) -> Result<(), DatasetError> {
        if self.status != expected {
            return Err(DatasetError::WrongStatus { session: self.session_id.clone(), status: self.status, expected });
        }
        Ok(())
    }

    pub fn summary(&self) -> SessionSummary {
        let targets = self.bucket_targets.to_array();
        let accepted = self.accepted_counts().to_array();
        SessionSummary {
            session_id: self.session_id.clone(),
            map_id: self.map_id.clone(),
            status: self.status,
            target_total: self.target_total,
            threshold: self.threshold,
            buckets: DifficultyBucket::ALL
                .iter()
                .map(|&b| BucketProgress { bucket: b, target: targets[b.index()], accepted: accepted[b.index()] })
                .collect(),
            pending: self.pending().count(),
            spares: self.candidates.iter().filter(|c| c.status == CandidateStatus::Spare).count(),
            round: self.round,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketProgress {
    pub bucket: DifficultyBucket,
    pub target: usize,
    pub accepted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub map_id: String,
    pub status: SessionStatus,
    pub target_total: usize,
    pub threshold: f64,
    pub buckets: Vec<BucketProgress>,
    pub pending: usize,
    pub spares: usize,
    pub round: u32,
}

/// "Visit A, then B." from the landmarks the goals sit on.
pub fn default_explanation(map: &WorldMap, goals: &[Point]) -> String {
    let names: Vec<String> = goals
        .iter()
        .map(|g| map.landmark_at(*g, LANDMARK_EPS).map_or_else(|| crate::prompting::fmt_point(g), |l| l.name.clone()))
        .collect();
    format!("Visit {}.", names.join(", then "))
}

fn landmark_consistent(map: &WorldMap, goals: &[Point]) -> bool {
    goals.iter().all(|g| map.landmark_at(*g, LANDMARK_EPS).is_some())
}

/// Generation prompt: landmarks, seed examples, unmet needs and the most
/// recent scored pairs.
pub fn build_generation_prompt(session: &CurationSession, map: &WorldMap, batch: usize) -> Vec<ChatMessage> {
    let t = &templates().generator;
    let system = format!("{}\n\nLandmarks:\n{}", t.system.trim(), render_landmarks(map));

    let mut user = String::new();
    if !session.seeds.is_empty() {
        let _ = writeln!(user, "{}", t.examples_header);
        for seed in &session.seeds {
            let _ = writeln!(user, "- {:?} -> goals {}", seed.task.text, fmt_points(&seed.task.goals));
        }
        user.push('\n');
    }
    let _ = writeln!(user, "{}", t.needs_header);
    let unmet = session.unmet();
    for bucket in DifficultyBucket::ALL {
        let n = unmet.get(bucket);
        if n > 0 {
            let _ = writeln!(user, "- {n} more tasks with {}", bucket.describe());
        }
    }
    let _ = writeln!(user, "Propose {batch} new tasks.\n");
    let _ = writeln!(user, "{}", t.feedback_header);
    let skip = session.feedback.len().saturating_sub(FEEDBACK_CAP);
    if session.feedback.len() == skip {
        let _ = writeln!(user, "{}", t.no_feedback);
    }
    for ex in &session.feedback[skip..] {
        let _ = writeln!(user, "- score {} | {} goals | {:?}", ex.score, ex.num_goals, ex.task);
    }
    vec![ChatMessage::system(system), ChatMessage::user(user)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub round: u32,
    pub candidate_ids: Vec<String>,
    pub dropped: usize,
}

/// Parses generator output into a new round of pending candidates. On error
/// the session is left untouched.
pub fn apply_generation(
    session: &mut CurationSession,
    map: &WorldMap,
    raw: &str,
) -> Result<GenerationReport, DatasetError> {
    session.check_map(map)?;
    session.expect_status(SessionStatus::Collecting)?;
    let entries = extract_object(raw)
        .and_then(|e| match e.object.get("tasks") {
            Some(Value::Array(items)) => Some(items.clone()),
            _ => None,
        })
        .unwrap_or_default();

    let round = session.round + 1;
    let mut seen: HashSet<String> =
        session.candidates.iter().chain(&session.seeds).map(|c| normalize(&c.task.text)).collect();
    let mut fresh = Vec::new();
    let mut dropped = 0;
    for entry in &entries {
        match parse_candidate(entry, map) {
            Some((text, goals, explanation)) if seen.insert(normalize(&text)) => {
                let id = format!("{}-r{}-{}", session.session_id, round, fresh.len() + 1);
                let task = Task::new(id, text, map.id(), goals).expect("goals validated non-empty and finite");
                fresh.push(CandidateTask {
                    explanation: explanation.unwrap_or_else(|| default_explanation(map, &task.goals)),
                    task,
                    score: None,
                    generation_round: round,
                    provenance: Provenance::Generated,
                    status: CandidateStatus::Pending,
                    note: None,
                });
            }
            _ => dropped += 1,
        }
    }
    if fresh.is_empty() {
        return Err(DatasetError::NoCandidates { dropped });
    }
    let candidate_ids: Vec<String> = fresh.iter().map(|c| c.id().to_string()).collect();
    session.round = round;
    session.candidates.extend(fresh);
    session.rounds.push(RoundRecord { round, candidate_ids: candidate_ids.clone(), dropped, scores: Vec::new() });
    session.status = SessionStatus::Scoring;
    Ok(GenerationReport { round, candidate_ids, dropped })
}

fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn parse_candidate(entry: &Value, map: &WorldMap) -> Option<(String, Vec<Point>, Option<String>)> {
    let text = entry.get("task")?.as_str()?.trim();
    if text.is_empty() {
        return None;
    }
    let (goals, _) = parse_positions(entry.get("goals")?).ok()?;
    if goals.is_empty() || !landmark_consistent(map, &goals) {
        return None;
    }
    let explanation = entry.get("explanation").and_then(Value::as_str).map(str::to_string);
    Some((text.to_string(), goals, explanation))
}

/// One generation round: prompt, completion, parse.
pub fn generate_candidates(
    session: &mut CurationSession,
    map: &WorldMap,
    generator: &dyn Backend,
    batch: usize,
) -> Result<GenerationReport, DatasetError> {
    let raw = request_candidates(session, map, generator, batch)?;
    apply_generation(session, map, &raw)
}

/// Checks preconditions and queries the generator without touching the
/// session. Split out so services can run it off the session lock.
pub fn request_candidates(
    session: &CurationSession,
    map: &WorldMap,
    generator: &dyn Backend,
    batch: usize,
) -> Result<String, DatasetError> {
    check_generation(session, map, batch)?;
    let messages = build_generation_prompt(session, map, batch);
    let req = CompletionRequest::with_defaults(messages, generator.defaults());
    Ok(generator.complete(&req)?.text)
}

pub fn check_generation(session: &CurationSession, map: &WorldMap, batch: usize) -> Result<(), DatasetError> {
    session.check_map(map)?;
    session.expect_status(SessionStatus::Collecting)?;
    if session.targets_met() {
        return Err(DatasetError::TargetsMet);
    }
    if batch == 0 {
        return Err(DatasetError::EmptyBatch);
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: Vec<String>,
    pub rejected: Vec<String>,
    pub spares: Vec<String>,
}

/// Records human scores. Validation is all-or-nothing: on error no score is
/// applied.
pub fn ingest_scores(
    session: &mut CurationSession,
    map: &WorldMap,
    scores: &[(String, f64)],
) -> Result<IngestReport, DatasetError> {
    session.check_map(map)?;
    session.expect_status(SessionStatus::Scoring)?;
    let mut seen = HashSet::new();
    for (id, score) in scores {
        let cand = session.candidate(id).ok_or_else(|| DatasetError::UnknownCandidate(id.clone()))?;
        if cand.status != CandidateStatus::Pending || !seen.insert(id.as_str()) {
            return Err(DatasetError::DuplicateScore(id.clone()));
        }
        if !(0.0..=SCORE_MAX).contains(score) {
            return Err(DatasetError::ScoreOutOfRange { candidate: id.clone(), score: *score });
        }
    }

    let mut report = IngestReport::default();
    for (id, score) in scores {
        let unmet = session.unmet();
        let threshold = session.threshold;
        let idx = session.candidates.iter().position(|c| c.id() == id).expect("validated above");
        let cand = &mut session.candidates[idx];
        cand.score = Some(*score);
        let bucket = cand.task.difficulty_bucket;
        if *score < threshold {
            cand.status = CandidateStatus::Rejected;
            report.rejected.push(id.clone());
        } else if !landmark_consistent(map, &cand.task.goals) {
            cand.status = CandidateStatus::Rejected;
            cand.note = Some("goals do not match landmarks".into());
            report.rejected.push(id.clone());
        } else if unmet.get(bucket) == 0 {
            cand.status = CandidateStatus::Spare;
            report.spares.push(id.clone());
        } else {
            cand.status = CandidateStatus::Accepted;
            report.accepted.push(id.clone());
        }
        let cand = &session.candidates[idx];
        if cand.status == CandidateStatus::Accepted {
            session.accepted.push(id.clone());
        }
        session.feedback.push(ScoredExample {
            candidate_id: id.clone(),
            task: cand.task.text.clone(),
            num_goals: cand.task.num_goals,
            score: *score,
        });
        if let Some(round) = session.rounds.iter_mut().find(|r| r.candidate_ids.contains(id)) {
            round.scores.push((id.clone(), *score));
        }
    }

    session.status = if session.targets_met() {
        SessionStatus::Complete
    } else if session.pending().next().is_none() {
        SessionStatus::Collecting
    } else {
        SessionStatus::Scoring
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{make_backend, BackendConfig, ScriptTable};
    use crate::world::load_world;

    pub(crate) fn map() -> WorldMap {
        let doc = r#"{"id":"ward","resolution_m":1.0,"origin":[0,0],"grid":["........","........"],
            "landmarks":[{"name":"bed","x":0.5,"y":0.5},{"name":"sink","x":3.5,"y":0.5},
                         {"name":"door","x":7.5,"y":1.5},{"name":"desk","x":5.5,"y":1.5}]}"#;
        load_world(doc.as_bytes()).unwrap()
    }

    fn generator(text: &str) -> Box<dyn Backend> {
        make_backend(&BackendConfig::scripted(ScriptTable::new(vec![], text, 0.0))).unwrap()
    }

    const THREE: &str = r#"{"tasks":[
        {"task":"Bring towels to the sink.","goals":[[3.5,0.5]]},
        {"task":"Check the bed, then the door.","goals":[[0.5,0.5],[7.5,1.5]]},
        {"task":"Go to the desk.","goals":[[5.5,1.5]],"explanation":"desk only"}]}"#;

    fn session() -> CurationSession {
        CurationSession::new("s1", &map(), 7, DEFAULT_THRESHOLD, vec![]).unwrap()
    }

    #[test]
    fn generation_round() {
        let mut s = session();
        let report = generate_candidates(&mut s, &map(), &*generator(THREE), 3).unwrap();
        assert_eq!(report.candidate_ids.len(), 3);
        assert_eq!(report.dropped, 0);
        assert_eq!(s.round, 1);
        assert_eq!(s.status, SessionStatus::Scoring);
        assert_eq!(s.candidates[0].id(), "s1-r1-1");
        assert_eq!(s.candidates[0].explanation, "Visit sink.");
        assert_eq!(s.candidates[2].explanation, "desk only");
    }

    #[test]
    fn malformed_entries_are_dropped() {
        let raw = r#"Here are tasks: {"tasks":[
            {"task":"Go to the sink.","goals":[[3.5,0.5]]},
            {"task":"Broken","goals":[[3.5]]},
            {"task":"Go to the bed.","goals":[[0.5,0.5]]}]}"#;
        let mut s = session();
        let report = generate_candidates(&mut s, &map(), &*generator(raw), 3).unwrap();
        assert_eq!((report.candidate_ids.len(), report.dropped), (2, 1));
    }

    #[test]
    fn off_landmark_and_duplicate_text_dropped() {
        let raw = r#"{"tasks":[{"task":"Go somewhere.","goals":[[1.0,1.0]]},
            {"task":"Go to the sink.","goals":[[3.5,0.5]]},{"task":"go to  the SINK.","goals":[[3.5,0.5]]}]}"#;
        let mut s = session();
        let report = generate_candidates(&mut s, &map(), &*generator(raw), 3).unwrap();
        assert_eq!((report.candidate_ids.len(), report.dropped), (1, 2));
    }

    #[test]
    fn zero_candidates_leaves_session_unchanged() {
        let mut s = session();
        let before = s.clone();
        let err = generate_candidates(&mut s, &map(), &*generator("sorry, no tasks"), 3).unwrap_err();
        assert!(matches!(err, DatasetError::NoCandidates { dropped: 0 }));
        assert_eq!(s, before);
    }

    #[test]
    fn generation_preconditions() {
        let mut s = session();
        s.status = SessionStatus::Scoring;
        assert!(matches!(
            generate_candidates(&mut s, &map(), &*generator(THREE), 3),
            Err(DatasetError::WrongStatus { .. })
        ));
        let mut s = session();
        s.bucket_targets = BucketCounts::default();
        assert!(matches!(generate_candidates(&mut s, &map(), &*generator(THREE), 3), Err(DatasetError::TargetsMet)));
    }

    #[test]
    fn threshold_rule() {
        let mut s = session();
        generate_candidates(&mut s, &map(), &*generator(THREE), 3).unwrap();
        let scores = vec![("s1-r1-1".to_string(), 9.0), ("s1-r1-2".to_string(), 5.0), ("s1-r1-3".to_string(), 8.0)];
        let report = ingest_scores(&mut s, &map(), &scores).unwrap();
        // bucket `one` has a target of 1, so the second one-goal task is spare
        assert_eq!(report.accepted, vec!["s1-r1-1".to_string()]);
        assert_eq!(report.spares, vec!["s1-r1-3".to_string()]);
        assert_eq!(report.rejected, vec!["s1-r1-2".to_string()]);
        assert_eq!(s.feedback.len(), 3);
        assert_eq!(s.accepted_counts().one, 1);
        assert_eq!(s.status, SessionStatus::Collecting);
        assert_eq!(s.rounds[0].scores.len(), 3);
    }

    #[test]
    fn full_bucket_high_scorer_is_spare() {
        let raw = r#"{"tasks":[{"task":"Go to the sink.","goals":[[3.5,0.5]]},
            {"task":"Go to the desk.","goals":[[5.5,1.5]]}]}"#;
        let mut s = session(); // bucket `one` target is 1
        generate_candidates(&mut s, &map(), &*generator(raw), 2).unwrap();
        let report =
            ingest_scores(&mut s, &map(), &[("s1-r1-1".into(), 9.0), ("s1-r1-2".into(), 10.0)]).unwrap();
        assert_eq!(report.accepted.len(), 1);
        assert_eq!(report.spares, vec!["s1-r1-2".to_string()]);
        assert_eq!(s.summary().spares, 1);
    }

    #[test]
    fn ingest_errors_are_atomic() {
        let mut s = session();
        generate_candidates(&mut s, &map(), &*generator(THREE), 3).unwrap();
        let before = s.clone();
        let err = ingest_scores(&mut s, &map(), &[("s1-r1-1".into(), 9.0), ("s1-r1-2".into(), 11.0)]).unwrap_err();
        assert!(matches!(err, DatasetError::ScoreOutOfRange { .. }));
        assert_eq!(s, before);
        assert!(matches!(
            ingest_scores(&mut s, &map(), &[("nope".into(), 5.0)]),
            Err(DatasetError::UnknownCandidate(_))
        ));
        assert!(matches!(
            ingest_scores(&mut s, &map(), &[("s1-r1-1".into(), 5.0), ("s1-r1-1".into(), 6.0)]),
            Err(DatasetError::DuplicateScore(_))
        ));
        ingest_scores(&mut s, &map(), &[("s1-r1-1".into(), 5.0)]).unwrap();
        // partially scored round stays in scoring
        assert_eq!(s.status, SessionStatus::Scoring);
        assert!(matches!(
            ingest_scores(&mut s, &map(), &[("s1-r1-1".into(), 6.0)]),
            Err(DatasetError::DuplicateScore(_))
        ));
    }

    #[test]
    fn generation_prompt_carries_feedback_and_needs() {
        let seed = Task::new("seed-1", "Wash hands at the sink.", "ward", vec![Point::new(3.5, 0.5)]).unwrap();
        let mut s = CurationSession::new("s2", &map(), 7, DEFAULT_THRESHOLD, vec![seed]).unwrap();
        let first = build_generation_prompt(&s, &map(), 3);
        assert!(first[0].content.contains("sink (3.5, 0.5)"));
        assert!(first[1].content.contains("Wash hands at the sink."));
        assert!(first[1].content.contains("no tasks scored yet"));
        assert!(first[1].content.contains("- 3 more tasks with exactly 2 goal points"));
        generate_candidates(&mut s, &map(), &*generator(THREE), 3).unwrap();
        let ids: Vec<(String, f64)> = s.candidates.iter().map(|c| (c.id().to_string(), 2.0)).collect();
        ingest_scores(&mut s, &map(), &ids).unwrap();
        let next = build_generation_prompt(&s, &map(), 3);
        assert!(next[1].content.contains("- score 2 | 1 goals | \"Bring towels to the sink.\""));
    }

    #[test]
    fn feedback_prompt_is_capped() {
        let mut s = session();
        for i in 0..60 {
            s.feedback.push(ScoredExample { candidate_id: format!("c{i}"), task: format!("task number {i}"), num_goals: 1, score: 1.0 });
        }
        let prompt = &build_generation_prompt(&s, &map(), 3)[1].content;
        assert!(!prompt.contains("\"task number 9\""));
        assert!(prompt.contains("\"task number 10\""));
        assert!(prompt.contains("\"task number 59\""));
    }
}
