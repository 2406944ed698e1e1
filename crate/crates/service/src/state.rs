use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use navharness_core::backend::Backend;
use navharness_core::dataset::{CurationSession, SessionStore};
use navharness_core::world::{load_world_file, WorldMap};
use serde::Serialize;

use crate::error::ApiError;
use crate::ServiceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct Job {
    pub job_id: String,
    pub session_id: String,
    pub state: JobState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropped_count: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub candidate_ids: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub type SessionSlot = Arc<tokio::sync::Mutex<CurationSession>>;

pub struct AppState {
    pub data_dir: PathBuf,
    pub maps: HashMap<String, Arc<WorldMap>>,
    pub store: SessionStore,
    pub generator: Option<Arc<dyn Backend>>,
    sessions: Mutex<HashMap<String, SessionSlot>>,
    pub jobs: Mutex<HashMap<String, Job>>,
    /// Sessions with a generation job queued or running.
    pub generating: Mutex<HashSet<String>>,
}

impl AppState {
    pub fn new(
        data_dir: &Path,
        world_files: &[PathBuf],
        generator: Option<Arc<dyn Backend>>,
    ) -> Result<Self, ServiceError> {
        let store = SessionStore::open(data_dir)?;
        let probe = data_dir.join("sessions").join(".write-probe");
        std::fs::write(&probe, b"ok").map_err(|e| ServiceError::DataDir(data_dir.to_path_buf(), e))?;
        let _ = std::fs::remove_file(&probe);

        let mut files = world_files.to_vec();
        if let Ok(entries) = std::fs::read_dir(data_dir.join("maps")) {
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "world"))
                .collect();
            found.sort();
            files.extend(found);
        }
        let mut maps = HashMap::new();
        for path in files {
            let map = load_world_file(&path).map_err(|e| ServiceError::World(path.clone(), e))?;
            if maps.insert(map.id().to_string(), Arc::new(map)).is_some() {
                return Err(ServiceError::DuplicateMap(path));
            }
        }
        Ok(Self {
            data_dir: data_dir.to_path_buf(),
            maps,
            store,
            generator,
            sessions: Mutex::new(HashMap::new()),
            jobs: Mutex::new(HashMap::new()),
            generating: Mutex::new(HashSet::new()),
        })
    }

    pub fn map(&self, id: &str) -> Result<Arc<WorldMap>, ApiError> {
        self.maps.get(id).cloned().ok_or_else(|| ApiError::invalid(format!("unknown map {id:?}")))
    }

    /// In-memory slot for a session, loading it from disk on first use.
    pub fn session(&self, id: &str) -> Result<SessionSlot, ApiError> {
        let mut sessions = self.sessions.lock().expect("session table lock");
        if let Some(slot) = sessions.get(id) {
            return Ok(slot.clone());
        }
        let session = self.store.load(id)?;
        let slot = Arc::new(tokio::sync::Mutex::new(session));
        sessions.insert(id.to_string(), slot.clone());
        Ok(slot)
    }

    /// Registers a freshly created session; fails if the id is taken.
    pub fn insert_session(&self, session: CurationSession) -> Result<SessionSlot, ApiError> {
        let mut sessions = self.sessions.lock().expect("session table lock");
        let id = session.session_id.clone();
        if sessions.contains_key(&id) || self.store.exists(&id) {
            return Err(ApiError::conflict(format!("session {id:?} already exists")));
        }
        self.store.save(&session)?;
        let slot = Arc::new(tokio::sync::Mutex::new(session));
        sessions.insert(id, slot.clone());
        Ok(slot)
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.data_dir.join("runs")
    }

    pub fn exports_dir(&self) -> PathBuf {
        self.data_dir.join("exports")
    }
}

/// Applies `f` to a copy of the session, persists the copy, then swaps it
/// in. On any error the stored and in-memory session are unchanged.
pub fn commit<T, E>(
    store: &SessionStore,
    session: &mut CurationSession,
    f: impl FnOnce(&mut CurationSession) -> Result<T, E>,
) -> Result<T, ApiError>
where
    ApiError: From<E>,
{
    let mut draft = session.clone();
    let out = f(&mut draft)?;
    store.save(&draft)?;
    *session = draft;
    Ok(out)
}
