//! Sessions, their immutable artifact caches, and background jobs.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use skelmap::geometry::{build_knn_graph, NeighborhoodGraph, PointCloud};
use tokio::sync::{watch, Semaphore};

use crate::error::{ApiError, ApiResult};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Requests still computing after this long get `202` and a job id.
    pub timeout: Duration,
    /// Concurrent core computations.
    pub workers: usize,
    /// Sessions and artifacts are mirrored here and reloaded at startup.
    pub data_dir: Option<PathBuf>,
    /// Allowed CORS origin; any origin when unset.
    pub cors_origin: Option<String>,
    /// Static UI assets served at `/`.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(30),
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            data_dir: None,
            cors_origin: None,
            static_dir: None,
        }
    }
}

/// A cached response body; never modified after insertion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact {
    pub kind: String,
    pub seq: u64,
    pub body: Value,
}

pub struct Session {
    pub id: String,
    pub cloud: PointCloud,
    pub source: Value,
    artifacts: RwLock<HashMap<String, Arc<Artifact>>>,
    graphs: Mutex<HashMap<usize, Arc<NeighborhoodGraph>>>,
    seq: AtomicU64,
    dir: Option<PathBuf>,
}

impl Session {
    pub fn artifact(&self, hash: &str) -> Option<Arc<Artifact>> {
        self.artifacts.read().get(hash).cloned()
    }

    /// Most recent artifact of a kind, with its hash.
    pub fn latest(&self, kind: &str) -> Option<(String, Arc<Artifact>)> {
        self.artifacts
            .read()
            .iter()
            .filter(|(_, a)| a.kind == kind)
            .max_by_key(|(_, a)| a.seq)
            .map(|(h, a)| (h.clone(), a.clone()))
    }

    /// Inserts unless the hash is already present; the first write wins.
    fn insert(&self, hash: &str, kind: &str, body: Value) -> Arc<Artifact> {
        let mut map = self.artifacts.write();
        if let Some(a) = map.get(hash) {
            return a.clone();
        }
        let artifact = Arc::new(Artifact {
            kind: kind.to_string(),
            seq: self.seq.fetch_add(1, Ordering::SeqCst),
            body,
        });
        if let Some(dir) = &self.dir {
            let path = dir.join("artifacts").join(format!("{hash}.json"));
            if let Err(e) = std::fs::create_dir_all(dir.join("artifacts"))
                .and_then(|_| std::fs::write(&path, serde_json::to_vec(&*artifact).unwrap_or_default()))
            {
                eprintln!("warning: could not persist {}: {e}", path.display());
            }
        }
        map.insert(hash.to_string(), artifact.clone());
        artifact
    }

    /// The kNN graph for `k`, built once per session.
    pub fn graph(&self, k: usize) -> ApiResult<Arc<NeighborhoodGraph>> {
        if let Some(g) = self.graphs.lock().get(&k) {
            return Ok(g.clone());
        }
        let g = Arc::new(build_knn_graph(&self.cloud, k)?);
        Ok(self.graphs.lock().entry(k).or_insert(g).clone())
    }

    pub fn summary(&self) -> Value {
        let map = self.artifacts.read();
        let mut list: Vec<(&String, &Arc<Artifact>)> = map.iter().collect();
        list.sort_by_key(|(_, a)| a.seq);
        json!({
            "id": self.id,
            "n": self.cloud.len(),
            "dim": self.cloud.dim(),
            "source": self.source,
            "artifacts": list.iter().map(|(h, a)| json!({ "hash": h, "kind": a.kind })).collect::<Vec<_>>(),
        })
    }
}

type Outcome = Result<Arc<Value>, ApiError>;

struct Inner {
    config: ServiceConfig,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    jobs: RwLock<HashMap<String, watch::Receiver<Option<Outcome>>>>,
    inflight: Mutex<HashMap<(String, String), String>>,
    permits: Arc<Semaphore>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

/// Hex digest of an operation name and its fully defaulted parameters.
pub fn param_hash<T: Serialize>(op: &str, params: &T) -> String {
    // to_value sorts object keys, so field order never matters.
    let canonical = serde_json::to_value(params).map(|v| v.to_string()).unwrap_or_default();
    let digest = Sha256::digest(format!("{op}\n{canonical}").as_bytes());
    hex::encode(&digest[..16])
}

#[derive(Serialize, Deserialize)]
struct SessionMeta {
    id: String,
    source: Value,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> std::io::Result<Self> {
        let permits = Arc::new(Semaphore::new(config.workers.max(1)));
        let state = AppState(Arc::new(Inner {
            config,
            sessions: RwLock::new(HashMap::new()),
            jobs: RwLock::new(HashMap::new()),
            inflight: Mutex::new(HashMap::new()),
            permits,
        }));
        if let Some(dir) = state.0.config.data_dir.clone() {
            std::fs::create_dir_all(&dir)?;
            state.load(&dir)?;
        }
        Ok(state)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.0.config
    }

    fn load(&self, dir: &Path) -> std::io::Result<()> {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
        entries.sort();
        for path in entries.into_iter().filter(|p| p.is_dir()) {
            let meta: SessionMeta = match std::fs::read(path.join("session.json")).map(|b| serde_json::from_slice(&b)) {
                Ok(Ok(m)) => m,
                _ => continue,
            };
            let cloud = match skelmap::io::read_point_cloud_file(path.join("cloud.csv")) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("warning: skipping session {}: {e}", meta.id);
                    continue;
                }
            };
            let mut artifacts = HashMap::new();
            if let Ok(read) = std::fs::read_dir(path.join("artifacts")) {
                for entry in read.flatten() {
                    let p = entry.path();
                    let Some(hash) = p.file_stem().and_then(|s| s.to_str()).map(str::to_string) else { continue };
                    if let Ok(Ok(a)) = std::fs::read(&p).map(|b| serde_json::from_slice::<Artifact>(&b)) {
                        artifacts.insert(hash, Arc::new(a));
                    }
                }
            }
            let next = artifacts.values().map(|a| a.seq + 1).max().unwrap_or(0);
            let session = Session {
                id: meta.id.clone(),
                cloud,
                source: meta.source,
                artifacts: RwLock::new(artifacts),
                graphs: Mutex::new(HashMap::new()),
                seq: AtomicU64::new(next),
                dir: Some(path.clone()),
            };
            self.0.sessions.write().insert(meta.id, Arc::new(session));
        }
        Ok(())
    }

    pub fn create_session(&self, cloud: PointCloud, source: Value) -> ApiResult<Arc<Session>> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let dir = self.0.config.data_dir.as_ref().map(|d| d.join(&id));
        if let Some(dir) = &dir {
            let meta = SessionMeta { id: id.clone(), source: source.clone() };
            std::fs::create_dir_all(dir)
                .map_err(|e| ApiError::internal(e.to_string()))?;
            std::fs::write(dir.join("session.json"), serde_json::to_vec_pretty(&meta)?)
                .map_err(|e| ApiError::internal(e.to_string()))?;
            skelmap::io::write_point_cloud_file(dir.join("cloud.csv"), &cloud)?;
        }
        let session = Arc::new(Session {
            id: id.clone(),
            cloud,
            source,
            artifacts: RwLock::new(HashMap::new()),
            graphs: Mutex::new(HashMap::new()),
            seq: AtomicU64::new(0),
            dir,
        });
        self.0.sessions.write().insert(id, session.clone());
        Ok(session)
    }

    pub fn session(&self, id: &str) -> ApiResult<Arc<Session>> {
        self.0.sessions.read().get(id).cloned().ok_or_else(|| ApiError::not_found(format!("session {id}")))
    }

    pub fn job_status(&self, id: &str) -> ApiResult<Value> {
        let jobs = self.0.jobs.read();
        let rx = jobs.get(id).ok_or_else(|| ApiError::not_found(format!("job {id}")))?;
        let status = match &*rx.borrow() {
            None => json!({ "id": id, "status": "running" }),
            Some(Ok(body)) => json!({ "id": id, "status": "done", "result": **body }),
            Some(Err(e)) => json!({ "id": id, "status": "failed", "http_status": e.status.as_u16(), "error": e.body }),
        };
        Ok(status)
    }

    /// Returns the cached artifact for `hash`, or runs `work` on the worker
    /// pool, caching a successful result. Waits up to the configured timeout
    /// before answering `202` with a job id to poll.
    pub async fn compute<F>(&self, session: &Arc<Session>, kind: &'static str, hash: String, work: F) -> ApiResult<Response>
    where
        F: FnOnce() -> ApiResult<Value> + Send + 'static,
    {
        if let Some(a) = session.artifact(&hash) {
            return Ok(Json(a.body.clone()).into_response());
        }
        let key = (session.id.clone(), hash.clone());
        let (job_id, mut rx) = {
            let mut inflight = self.0.inflight.lock();
            match inflight.get(&key) {
                Some(job) => (job.clone(), self.0.jobs.read()[job].clone()),
                None => {
                    let job = uuid::Uuid::new_v4().simple().to_string();
                    let (tx, rx) = watch::channel(None);
                    self.0.jobs.write().insert(job.clone(), rx.clone());
                    inflight.insert(key.clone(), job.clone());
                    let state = self.clone();
                    let session = session.clone();
                    tokio::spawn(async move {
                        let outcome = match state.0.permits.clone().acquire_owned().await {
                            Ok(_permit) => match tokio::task::spawn_blocking(work).await {
                                Ok(Ok(body)) => Ok(Arc::new(session.insert(&hash, kind, body).body.clone())),
                                Ok(Err(e)) => Err(e),
                                Err(e) => Err(ApiError::internal(format!("computation failed: {e}"))),
                            },
                            Err(_) => Err(ApiError::internal("worker pool closed")),
                        };
                        state.0.inflight.lock().remove(&key);
                        let _ = tx.send(Some(outcome));
                    });
                    (job, rx)
                }
            }
        };
        let waited = tokio::time::timeout(self.0.config.timeout, rx.wait_for(|o| o.is_some())).await;
        match waited {
            Ok(Ok(outcome)) => match outcome.as_ref().expect("waited for completion") {
                Ok(body) => Ok(Json((**body).clone()).into_response()),
                Err(e) => Err(e.clone()),
            },
            Ok(Err(_)) => Err(ApiError::internal("job channel closed")),
            Err(_) => Ok((
                StatusCode::ACCEPTED,
                Json(json!({ "job": job_id, "status": "running", "poll": format!("/jobs/{job_id}") })),
            )
                .into_response()),
        }
    }
}
