use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use tokio::sync::RwLock;

use thematica_core::corpus::IngestPayload;
use thematica_core::graph::ZoomThresholds;
use thematica_core::store::{load_workspace, save_workspace, Clock};
use thematica_core::{Corpus, Provider, Workspace, WorkspaceId};

use crate::error::{ApiError, ApiResult};
use crate::jobs::JobTicket;

pub type WorkspaceHandle = Arc<RwLock<Workspace>>;

/// Shared service state. Cloning is cheap.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    corpus: std::sync::RwLock<Corpus>,
    workspaces: std::sync::RwLock<BTreeMap<WorkspaceId, WorkspaceHandle>>,
    jobs: Mutex<BTreeMap<String, JobTicket>>,
    next_job: AtomicU64,
    next_workspace: AtomicU64,
    provider: Arc<Provider>,
    data_dir: Option<PathBuf>,
    zoom: ZoomThresholds,
    clock: Clock,
}

impl AppState {
    /// In-memory state with logical timestamps.
    pub fn new(provider: Provider) -> Self {
        Self::build(provider, None, Clock::Logical, ZoomThresholds::default())
    }

    /// State persisted under `data_dir`, loading whatever is already there.
    pub fn open(provider: Provider, data_dir: &Path, clock: Clock) -> Result<Self, String> {
        let docs = data_dir.join("documents");
        let spaces = data_dir.join("workspaces");
        for dir in [&docs, &spaces] {
            std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        }
        let state = Self::build(provider, Some(data_dir.to_path_buf()), clock, ZoomThresholds::default());
        {
            let mut corpus = state.inner.corpus.write().expect("corpus lock");
            for path in json_files(&docs)? {
                let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                let payload: IngestPayload =
                    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
                corpus.ingest_document(payload).map_err(|e| format!("{}: {e}", path.display()))?;
            }
            let mut workspaces = state.inner.workspaces.write().expect("workspace lock");
            for path in json_files(&spaces)? {
                let mut ws = load_workspace(&path, &corpus).map_err(|e| format!("{}: {e}", path.display()))?;
                ws.set_clock(clock);
                workspaces.insert(ws.workspace_id().clone(), Arc::new(RwLock::new(ws)));
            }
        }
        Ok(state)
    }

    fn build(provider: Provider, data_dir: Option<PathBuf>, clock: Clock, zoom: ZoomThresholds) -> Self {
        Self {
            inner: Arc::new(Inner {
                corpus: Default::default(),
                workspaces: Default::default(),
                jobs: Default::default(),
                next_job: AtomicU64::new(1),
                next_workspace: AtomicU64::new(1),
                provider: Arc::new(provider),
                data_dir,
                zoom,
                clock,
            }),
        }
    }

    pub fn provider(&self) -> Arc<Provider> {
        self.inner.provider.clone()
    }

    pub fn zoom(&self) -> ZoomThresholds {
        self.inner.zoom
    }

    pub fn corpus(&self) -> std::sync::RwLockReadGuard<'_, Corpus> {
        self.inner.corpus.read().expect("corpus lock")
    }

    pub fn corpus_mut(&self) -> std::sync::RwLockWriteGuard<'_, Corpus> {
        self.inner.corpus.write().expect("corpus lock")
    }

    pub fn workspace(&self, id: &str) -> ApiResult<WorkspaceHandle> {
        self.inner
            .workspaces
            .read()
            .expect("workspace lock")
            .get(&WorkspaceId::from(id))
            .cloned()
            .ok_or_else(|| ApiError::workspace_missing(id))
    }

    pub fn workspace_ids(&self) -> Vec<(WorkspaceId, WorkspaceHandle)> {
        let map = self.inner.workspaces.read().expect("workspace lock");
        map.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }

    pub fn create_workspace(&self, requested: Option<String>) -> ApiResult<WorkspaceHandle> {
        let mut map = self.inner.workspaces.write().expect("workspace lock");
        let id = match requested {
            Some(id) => {
                let valid = !id.is_empty()
                    && id.len() <= 64
                    && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
                if !valid {
                    return Err(ApiError::validation(
                        "workspace_id must be 1-64 characters from [A-Za-z0-9_-]",
                    )
                    .with_details(serde_json::json!({"field": "workspace_id"})));
                }
                if map.contains_key(&WorkspaceId::from(id.as_str())) {
                    return Err(ApiError::new(
                        axum::http::StatusCode::CONFLICT,
                        "workspace_exists",
                        format!("workspace `{id}` already exists"),
                    ));
                }
                id
            }
            None => loop {
                let id = format!("ws-{}", self.inner.next_workspace.fetch_add(1, Ordering::Relaxed));
                if !map.contains_key(&WorkspaceId::from(id.as_str())) {
                    break id;
                }
            },
        };
        let ws = Workspace::new(WorkspaceId::from(id.as_str())).with_clock(self.inner.clock);
        self.persist(&ws)?;
        let handle = Arc::new(RwLock::new(ws));
        map.insert(WorkspaceId::from(id.as_str()), handle.clone());
        Ok(handle)
    }

    /// Writes the workspace file when a data directory is configured.
    pub fn persist(&self, ws: &Workspace) -> ApiResult<()> {
        if let Some(dir) = &self.inner.data_dir {
            let path = dir.join("workspaces").join(format!("{}.json", ws.workspace_id()));
            save_workspace(ws, &path)?;
        }
        Ok(())
    }

    pub fn persist_document(&self, payload: &IngestPayload, doc_id: &str) -> ApiResult<()> {
        if let Some(dir) = &self.inner.data_dir {
            let path = dir.join("documents").join(format!("{doc_id}.json"));
            let bytes = serde_json::to_vec_pretty(payload).expect("payload serializes");
            std::fs::write(&path, bytes).map_err(|e| ApiError::engine("io_failure", e.to_string()))?;
        }
        Ok(())
    }

    pub fn mint_job_id(&self) -> String {
        format!("j{}", self.inner.next_job.fetch_add(1, Ordering::Relaxed))
    }

    pub fn put_job(&self, ticket: JobTicket) {
        self.inner.jobs.lock().expect("job lock").insert(ticket.job_id.clone(), ticket);
    }

    pub fn update_job(&self, job_id: &str, f: impl FnOnce(&mut JobTicket)) {
        if let Some(ticket) = self.inner.jobs.lock().expect("job lock").get_mut(job_id) {
            f(ticket);
        }
    }

    pub fn job(&self, job_id: &str) -> Option<JobTicket> {
        self.inner.jobs.lock().expect("job lock").get(job_id).cloned()
    }
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>, String> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}
