//! HTTP facade over curation sessions and iteration-run logs.
//!
//! Sessions persist under `<data_dir>/sessions`, so a restarted service
//! resumes them. Runs are read from `<data_dir>/runs/<run_id>/runlog.jsonl`.

mod error;
mod routes;
mod state;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use navharness_core::backend::Backend;
use navharness_core::dataset::StoreError;
use navharness_core::world::WorldError;
use thiserror::Error;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub use error::ApiError;
pub use routes::router;
pub use state::{AppState, Job, JobState};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("data dir {0} is not writable: {1}")]
    DataDir(PathBuf, std::io::Error),
    #[error("world {0}: {1}")]
    World(PathBuf, WorldError),
    #[error("world {0} reuses an id already loaded")]
    DuplicateMap(PathBuf),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("server: {0}")]
    Server(std::io::Error),
}

pub struct ServiceConfig {
    pub host: String,
    /// 0 picks a free port.
    pub port: u16,
    pub data_dir: PathBuf,
    pub world_files: Vec<PathBuf>,
    /// Backend for `POST /sessions/:id/next`; generation returns 503 without one.
    pub generator: Option<Arc<dyn Backend>>,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self { host: "127.0.0.1".into(), port: 0, data_dir: data_dir.into(), world_files: vec![], generator: None }
    }
}

pub struct ServiceHandle {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl ServiceHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting connections and waits for in-flight requests.
    pub async fn shutdown(mut self) -> Result<(), ServiceError> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.task.await {
            Ok(res) => res.map_err(ServiceError::Server),
            Err(e) => Err(ServiceError::Server(std::io::Error::other(e))),
        }
    }

    /// Serves until the server task ends.
    pub async fn wait(self) -> Result<(), ServiceError> {
        let _keep = self.shutdown;
        match self.task.await {
            Ok(res) => res.map_err(ServiceError::Server),
            Err(e) => Err(ServiceError::Server(std::io::Error::other(e))),
        }
    }
}

/// Loads maps and sessions, binds, and starts serving. Must run inside a
/// tokio runtime.
pub async fn serve(config: ServiceConfig) -> Result<ServiceHandle, ServiceError> {
    std::fs::create_dir_all(&config.data_dir).map_err(|e| ServiceError::DataDir(config.data_dir.clone(), e))?;
    let state = Arc::new(AppState::new(&config.data_dir, &config.world_files, config.generator)?);
    let addr = format!("{}:{}", config.host, config.port);
    let listener =
        tokio::net::TcpListener::bind(&addr).await.map_err(|source| ServiceError::Bind { addr: addr.clone(), source })?;
    let local = listener.local_addr().map_err(|source| ServiceError::Bind { addr, source })?;
    let (tx, rx) = oneshot::channel::<()>();
    let app = router(state);
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async move {
                let _ = rx.await;
            })
            .await
    });
    tracing::info!(%local, "service listening");
    Ok(ServiceHandle { addr: local, shutdown: Some(tx), task })
}
