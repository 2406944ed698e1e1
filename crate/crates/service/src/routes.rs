use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use navharness_core::dataset::{
    apply_generation, check_generation, export_dataset, ingest_scores, request_candidates, valid_session_id,
    CandidateStatus, CandidateTask, CurationSession, SessionSummary, DEFAULT_THRESHOLD,
};
use navharness_core::iteration::{read_runlog_file, write_accuracy_csv, RunLog};
use navharness_core::metrics::{summarize_run, RunMetrics, RunSummary};
use navharness_core::task::{Task, TaskRecord};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::state::{commit, AppState, Job, JobState};

type AppResult<T> = Result<T, ApiError>;
type St = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/candidates", get(list_candidates))
        .route("/sessions/{id}/next", post(next_round))
        .route("/sessions/{id}/scores", post(submit_scores))
        .route("/sessions/{id}/export", post(export))
        .route("/jobs/{id}", get(get_job))
        .route("/runs", get(list_runs))
        .route("/runs/{id}/metrics", get(run_metrics))
        .route("/runs/{id}/accuracy.csv", get(run_accuracy))
        .with_state(state)
}

async fn healthz() -> Json<Value> {
    Json(json!({ "status": "ok", "version": env!("CARGO_PKG_VERSION") }))
}

#[derive(Debug, Deserialize)]
struct CreateSession {
    map_id: String,
    target_total: usize,
    threshold: Option<f64>,
    session_id: Option<String>,
    #[serde(default)]
    seeds: Vec<TaskRecord>,
}

async fn create_session(State(st): St, Json(body): Json<CreateSession>) -> AppResult<(StatusCode, Json<SessionSummary>)> {
    let map = st.map(&body.map_id)?;
    let id = body.session_id.unwrap_or_else(|| uuid::Uuid::new_v4().simple().to_string());
    let seeds = body
        .seeds
        .into_iter()
        .map(Task::try_from)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| ApiError::invalid(e.to_string()))?;
    let session = CurationSession::new(id, &map, body.target_total, body.threshold.unwrap_or(DEFAULT_THRESHOLD), seeds)?;
    let summary = session.summary();
    st.insert_session(session)?;
    Ok((StatusCode::CREATED, Json(summary)))
}

async fn list_sessions(State(st): St) -> AppResult<Json<Vec<SessionSummary>>> {
    let mut out = Vec::new();
    for id in st.store.list()? {
        let slot = st.session(&id)?;
        let summary = slot.lock().await.summary();
        out.push(summary);
    }
    Ok(Json(out))
}

async fn get_session(State(st): St, Path(id): Path<String>) -> AppResult<Json<SessionSummary>> {
    let slot = st.session(&id)?;
    let summary = slot.lock().await.summary();
    Ok(Json(summary))
}

#[derive(Debug, Deserialize)]
struct CandidateFilter {
    status: Option<CandidateStatus>,
}

async fn list_candidates(
    State(st): St,
    Path(id): Path<String>,
    Query(filter): Query<CandidateFilter>,
) -> AppResult<Json<Vec<CandidateTask>>> {
    let slot = st.session(&id)?;
    let session = slot.lock().await;
    let list = session
        .candidates
        .iter()
        .filter(|c| filter.status.is_none_or(|s| c.status == s))
        .cloned()
        .collect();
    Ok(Json(list))
}

#[derive(Debug, Deserialize)]
struct NextBody {
    batch: usize,
}

async fn next_round(State(st): St, Path(id): Path<String>, Json(body): Json<NextBody>) -> AppResult<(StatusCode, Json<Value>)> {
    let generator = st
        .generator
        .clone()
        .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no_generator", "no generator backend configured"))?;
    let slot = st.session(&id)?;
    let (snapshot, map) = {
        let session = slot.lock().await;
        let map = st.map(&session.map_id)?;
        check_generation(&session, &map, body.batch)?;
        if !st.generating.lock().expect("generating lock").insert(id.clone()) {
            return Err(ApiError::conflict(format!("session {id:?} already has a generation job")));
        }
        (session.clone(), map)
    };
    let job_id = uuid::Uuid::new_v4().simple().to_string();
    st.jobs.lock().expect("job lock").insert(
        job_id.clone(),
        Job {
            job_id: job_id.clone(),
            session_id: id.clone(),
            state: JobState::Queued,
            dropped_count: None,
            candidate_ids: vec![],
            error: None,
        },
    );

    let st2 = st.clone();
    let job = job_id.clone();
    tokio::spawn(async move {
        set_job(&st2, &job, |j| j.state = JobState::Running);
        let batch = body.batch;
        let gen_map = map.clone();
        let raw = tokio::task::spawn_blocking(move || request_candidates(&snapshot, &gen_map, &*generator, batch)).await;
        let outcome = match raw {
            Ok(Ok(raw)) => {
                let mut session = slot.lock().await;
                commit(&st2.store, &mut session, |s| apply_generation(s, &map, &raw))
            }
            Ok(Err(e)) => Err(ApiError::from(e)),
            Err(e) => Err(ApiError::internal(e.to_string())),
        };
        match outcome {
            Ok(report) => set_job(&st2, &job, |j| {
                j.state = JobState::Done;
                j.dropped_count = Some(report.dropped);
                j.candidate_ids = report.candidate_ids;
            }),
            Err(e) => {
                tracing::warn!(job = %job, error = %e.message, "generation failed");
                set_job(&st2, &job, |j| {
                    j.state = JobState::Failed;
                    j.error = Some(e.message);
                })
            }
        }
        st2.generating.lock().expect("generating lock").remove(&id);
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": job_id }))))
}

fn set_job(st: &AppState, id: &str, f: impl FnOnce(&mut Job)) {
    if let Some(job) = st.jobs.lock().expect("job lock").get_mut(id) {
        f(job);
    }
}

async fn get_job(State(st): St, Path(id): Path<String>) -> AppResult<Json<Job>> {
    let jobs = st.jobs.lock().expect("job lock");
    jobs.get(&id).cloned().map(Json).ok_or_else(|| ApiError::not_found(format!("job {id:?} not found")))
}

#[derive(Debug, Deserialize)]
struct ScoreEntry {
    candidate_id: String,
    score: f64,
}

#[derive(Debug, Deserialize)]
struct ScoresBody {
    scores: Vec<ScoreEntry>,
}

async fn submit_scores(State(st): St, Path(id): Path<String>, Json(body): Json<ScoresBody>) -> AppResult<Json<SessionSummary>> {
    let slot = st.session(&id)?;
    let mut session = slot.lock().await;
    let map = st.map(&session.map_id)?;
    let scores: Vec<(String, f64)> = body.scores.into_iter().map(|s| (s.candidate_id, s.score)).collect();
    commit(&st.store, &mut session, |s| ingest_scores(s, &map, &scores))?;
    Ok(Json(session.summary()))
}

#[derive(Debug, Deserialize)]
struct ExportBody {
    test_fraction: f64,
    seed: u64,
}

async fn export(State(st): St, Path(id): Path<String>, Json(body): Json<ExportBody>) -> AppResult<Json<Value>> {
    let slot = st.session(&id)?;
    let session = slot.lock().await;
    let map = st.map(&session.map_id)?;
    let paths = export_dataset(&session, &map, st.exports_dir(), body.test_fraction, body.seed)?;
    Ok(Json(json!({
        "train_path": paths.train,
        "test_path": paths.test,
        "n_train": paths.n_train,
        "n_test": paths.n_test,
    })))
}

#[derive(Debug, Serialize)]
struct RunListing {
    run_id: String,
    iterations: usize,
    overall: RunMetrics,
}

fn load_run(st: &AppState, id: &str) -> AppResult<RunLog> {
    if !valid_session_id(id) {
        return Err(ApiError::not_found(format!("run {id:?} not found")));
    }
    let path = st.runs_dir().join(id).join("runlog.jsonl");
    if !path.is_file() {
        return Err(ApiError::not_found(format!("run {id:?} not found")));
    }
    read_runlog_file(&path).map_err(|e| ApiError::internal(format!("run {id:?}: {e}")))
}

async fn list_runs(State(st): St) -> AppResult<Json<Vec<RunListing>>> {
    let mut ids = Vec::new();
    if let Ok(entries) = std::fs::read_dir(st.runs_dir()) {
        for entry in entries.flatten() {
            let name = entry.file_name().to_string_lossy().into_owned();
            if valid_session_id(&name) && entry.path().join("runlog.jsonl").is_file() {
                ids.push(name);
            }
        }
    }
    ids.sort();
    let mut out = Vec::new();
    for id in ids {
        match load_run(&st, &id) {
            Ok(log) => {
                let summary = summarize_run(&log);
                out.push(RunListing { run_id: id, iterations: summary.iterations.len(), overall: summary.overall });
            }
            Err(e) => tracing::warn!(run = %id, error = %e.message, "skipping unreadable run"),
        }
    }
    Ok(Json(out))
}

async fn run_metrics(State(st): St, Path(id): Path<String>) -> AppResult<Json<RunSummary>> {
    Ok(Json(summarize_run(&load_run(&st, &id)?)))
}

async fn run_accuracy(State(st): St, Path(id): Path<String>) -> AppResult<impl IntoResponse> {
    let log = load_run(&st, &id)?;
    let mut buf = Vec::new();
    write_accuracy_csv(&mut buf, &log.accuracy).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], buf))
}
