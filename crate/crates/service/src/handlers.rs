use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::Response;
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use skelmap::embedding::{
    auto_landmark_count, classical_mds, isomap_on_graph, l_isomap_on_graph, linear_project, projection_search,
    random_landmarks, Direction, Embedding, EmbeddingMethod, ProjectionOptions, RankMetric,
};
use skelmap::geometry::{generate_shape, maxmin_subsample, DistanceMatrix, PointCloud, ShapeSpec};
use skelmap::persistence::{persistent_betti, vr_persistence, ScaleCap};
use skelmap::quality::{quality_report, rv_reference, QualityOptions};
use skelmap::skeleton::{build_skeleton, extract_landmarks, BaseStrategy, Eps, Skeleton, SkeletonParams};
use skelmap::tearing::{rank_cuts, tear_and_embed, Candidates, CutSpec, LocalityRadius, TearOptions};

use crate::error::{ApiError, ApiResult};
use crate::state::{param_hash, AppState, Session};

const DEFAULT_K: usize = 10;
/// Interactive default; batch tools use larger subsamples.
const DEFAULT_SUBSAMPLE: usize = 256;

fn default_k() -> usize {
    DEFAULT_K
}
fn default_d() -> usize {
    2
}
fn default_subsample() -> usize {
    DEFAULT_SUBSAMPLE
}
fn default_true() -> bool {
    true
}
fn default_t() -> f64 {
    0.5
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorSpec {
    shape: String,
    n: usize,
    #[serde(default)]
    noise: f64,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    generator: Option<GeneratorSpec>,
    csv: Option<String>,
}

/// `POST /sessions` with a JSON generator spec or CSV text, or a raw CSV body.
pub async fn create_session(State(state): State<AppState>, headers: HeaderMap, body: Bytes) -> ApiResult<Json<Value>> {
    let is_csv = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("text/csv") || v.starts_with("text/plain"));
    let (cloud, source) = if is_csv {
        (skelmap::io::read_point_cloud(body.as_ref())?, json!({ "kind": "csv" }))
    } else {
        let req: CreateSession =
            serde_json::from_slice(&body).map_err(|e| ApiError::invalid("body", format!("malformed request: {e}")))?;
        match (req.generator, req.csv) {
            (Some(g), None) => {
                let shape = g.shape.parse()?;
                let cloud = tokio::task::spawn_blocking(move || generate_shape(&ShapeSpec::new(shape, g.n, g.noise), g.seed))
                    .await
                    .map_err(|e| ApiError::internal(e.to_string()))??;
                let source = json!({ "kind": "generator", "shape": g.shape, "n": g.n, "noise": g.noise, "seed": g.seed });
                (cloud, source)
            }
            (None, Some(text)) => (skelmap::io::read_point_cloud(text.as_bytes())?, json!({ "kind": "csv" })),
            _ => return Err(ApiError::invalid("body", "give exactly one of `generator` or `csv`")),
        }
    };
    let session = state.create_session(cloud, source)?;
    Ok(Json(json!({ "id": session.id, "n": session.cloud.len(), "dim": session.cloud.dim() })))
}

pub async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(state.session(&id)?.summary()))
}

pub async fn get_cloud(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = state.session(&id)?;
    let points: Vec<&[f64]> = s.cloud.points().collect();
    Ok(Json(json!({ "dim": s.cloud.dim(), "points": points })))
}

pub async fn get_job(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(state.job_status(&id)?))
}

/// Base point as `"extreme"`, `"barycenter"` or a point index.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum BaseParam {
    Index(usize),
    Name(String),
}

impl BaseParam {
    fn resolve(&self) -> ApiResult<BaseStrategy> {
        match self {
            BaseParam::Index(i) => Ok(BaseStrategy::Explicit(*i)),
            BaseParam::Name(s) => Ok(s.parse()?),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SkeletonRequest {
    #[serde(default = "default_k")]
    k: usize,
    filter: Option<String>,
    base: Option<BaseParam>,
    n: Option<usize>,
    p: Option<f64>,
    eps: Option<Eps>,
    minpts: Option<usize>,
}

#[derive(Serialize)]
struct SkeletonKey {
    k: usize,
    params: SkeletonParams,
}

pub async fn skeleton(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let req: SkeletonRequest = parse_body(&body)?;
    if let Some(f) = &req.filter {
        if f != "dtb" {
            return Err(ApiError::invalid("filter", format!("only the dtb filter is supported, got {f:?}")));
        }
    }
    let defaults = SkeletonParams::default();
    let params = SkeletonParams {
        base: req.base.as_ref().map(BaseParam::resolve).transpose()?.unwrap_or(defaults.base),
        n: req.n.unwrap_or(defaults.n),
        p: req.p.unwrap_or(defaults.p),
        eps: req.eps.unwrap_or(defaults.eps),
        minpts: req.minpts.unwrap_or(defaults.minpts),
    };
    let key = SkeletonKey { k: req.k, params };
    let hash = param_hash("skeleton", &key);
    let s = session.clone();
    let h = hash.clone();
    state
        .compute(&session, "skeleton", hash, move || {
            let graph = s.graph(key.k)?;
            let skeleton = build_skeleton(&s.cloud, &graph, &key.params)?;
            Ok(json!({
                "hash": h,
                "k": key.k,
                "params": key.params,
                "cycle_rank": skeleton.cycle_rank(),
                "landmarks": extract_landmarks(&skeleton),
                "skeleton": skeleton,
            }))
        })
        .await
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    let body = if body.iter().all(u8::is_ascii_whitespace) { b"{}".as_slice() } else { body };
    serde_json::from_slice(body).map_err(|e| ApiError::invalid("body", format!("malformed request: {e}")))
}

/// The skeleton artifact named by `hash`, or the newest one.
fn load_skeleton(session: &Session, hash: Option<&str>) -> ApiResult<(String, usize, Skeleton)> {
    let (hash, artifact) = match hash {
        Some(h) => (h.to_string(), session.artifact(h).filter(|a| a.kind == "skeleton").ok_or_else(|| ApiError::not_found(format!("skeleton {h}")))?),
        None => session
            .latest("skeleton")
            .ok_or_else(|| ApiError::invalid("skeleton", "compute a skeleton for this session first"))?,
    };
    let k = artifact.body["k"].as_u64().ok_or_else(|| ApiError::internal("skeleton artifact without k"))? as usize;
    let skeleton: Skeleton = serde_json::from_value(artifact.body["skeleton"].clone())?;
    Ok((hash, k, skeleton))
}

/// `"auto"`, a count, or an explicit index list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum LandmarkParam {
    Count(usize),
    List(Vec<usize>),
    Auto(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbedRequest {
    method: EmbeddingMethod,
    #[serde(default = "default_k")]
    k: usize,
    #[serde(default = "default_d")]
    d: usize,
    landmarks: Option<LandmarkParam>,
    skeleton: Option<String>,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_true")]
    pca: bool,
    #[serde(default = "default_subsample")]
    subsample_size: usize,
}

#[derive(Serialize)]
struct EmbedKey {
    method: EmbeddingMethod,
    k: usize,
    d: usize,
    landmarks: Option<LandmarkParam>,
    skeleton: Option<String>,
    seed: u64,
    pca: bool,
    subsample_size: usize,
}

pub async fn embed(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let req: EmbedRequest = parse_body(&body)?;
    let n = session.cloud.len();
    if req.method == EmbeddingMethod::LinearProjection {
        return Err(ApiError::invalid("method", "use POST /sessions/{id}/project for linear projections"));
    }
    let explicit: Option<Vec<usize>> = match &req.landmarks {
        None => None,
        Some(LandmarkParam::Auto(s)) if s == "auto" => Some(random_landmarks(n, auto_landmark_count(n), req.seed)?),
        Some(LandmarkParam::Auto(s)) => return Err(ApiError::invalid("landmarks", format!("expected auto, a count or a list, got {s:?}"))),
        Some(LandmarkParam::Count(c)) => Some(random_landmarks(n, *c, req.seed)?),
        Some(LandmarkParam::List(l)) => Some(l.clone()),
    };
    let skeleton = if req.method == EmbeddingMethod::LIsomapHomology && explicit.is_none() {
        Some(load_skeleton(&session, req.skeleton.as_deref())?)
    } else {
        None
    };
    let key = EmbedKey {
        method: req.method,
        k: req.k,
        d: req.d,
        landmarks: req.landmarks.clone(),
        skeleton: skeleton.as_ref().map(|s| s.0.clone()),
        seed: req.seed,
        pca: req.pca,
        subsample_size: req.subsample_size,
    };
    let hash = param_hash("embed", &key);
    let s = session.clone();
    let h = hash.clone();
    state
        .compute(&session, "embedding", hash, move || {
            let mut e = match req.method {
                EmbeddingMethod::Mds => classical_mds(&DistanceMatrix::euclidean(&s.cloud), req.d)?,
                EmbeddingMethod::Isomap => isomap_on_graph(&*s.graph(req.k)?, req.d)?,
                EmbeddingMethod::LIsomapRandom | EmbeddingMethod::LIsomapHomology => {
                    let landmarks = match (&explicit, &skeleton) {
                        (Some(l), _) => l.clone(),
                        (None, Some((_, _, sk))) => extract_landmarks(sk),
                        (None, None) => random_landmarks(s.cloud.len(), auto_landmark_count(s.cloud.len()), req.seed)?,
                    };
                    let mut e = l_isomap_on_graph(&*s.graph(req.k)?, &landmarks, req.d, req.pca)?;
                    e.method = req.method;
                    e
                }
                EmbeddingMethod::LinearProjection => unreachable!("rejected above"),
            };
            e.params.seed = Some(req.seed);
            let report = report_for(&s.cloud, &e, req.subsample_size, req.seed)?;
            Ok(json!({ "hash": h, "embedding": e, "report": report }))
        })
        .await
}

fn report_for(cloud: &PointCloud, e: &Embedding, subsample_size: usize, seed: u64) -> ApiResult<Value> {
    let dx = rv_reference(cloud, e)?;
    let opts = QualityOptions { subsample_size, seed, threshold: None };
    Ok(serde_json::to_value(quality_report(cloud, e, &dx, &opts)?)?)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TearRequest {
    edge: (usize, usize),
    #[serde(default = "default_t")]
    t: f64,
    #[serde(default)]
    radius: LocalityRadius,
    skeleton: Option<String>,
    #[serde(default = "default_d")]
    d: usize,
    #[serde(default = "default_subsample")]
    subsample_size: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    extra_k: usize,
}

#[derive(Serialize)]
struct TearKey {
    cut: CutSpec,
    skeleton: String,
    options: TearOptions,
}

pub async fn tear(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let req: TearRequest = parse_body(&body)?;
    let (skeleton_hash, k, skeleton) = load_skeleton(&session, req.skeleton.as_deref())?;
    let key = TearKey {
        cut: CutSpec { skeleton_edge: req.edge, t: req.t, locality_radius: req.radius },
        skeleton: skeleton_hash,
        options: TearOptions { d: req.d, subsample_size: req.subsample_size, seed: req.seed, extra_k: req.extra_k },
    };
    let hash = param_hash("tear", &key);
    let s = session.clone();
    let h = hash.clone();
    state
        .compute(&session, "tear", hash, move || {
            let graph = s.graph(k)?;
            let result = tear_and_embed(&s.cloud, &graph, &skeleton, &key.cut, &key.options)?;
            let mut body = serde_json::to_value(&result)?;
            body["hash"] = json!(h);
            body["skeleton"] = json!(key.skeleton);
            if !result.connected {
                return Err(ApiError {
                    status: StatusCode::CONFLICT,
                    body: json!({
                        "error": format!("cut disconnects the graph into components of sizes {:?}", result.component_sizes),
                        "precondition": "cut_keeps_graph_connected",
                        "component_sizes": result.component_sizes,
                        "result": body,
                    }),
                });
            }
            Ok(body)
        })
        .await
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankQuery {
    skeleton: Option<String>,
    #[serde(default = "default_d")]
    d: usize,
    #[serde(default = "default_subsample")]
    subsample_size: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    extra_k: usize,
}

pub async fn tear_rank(State(state): State<AppState>, Path(id): Path<String>, Query(q): Query<RankQuery>) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let (skeleton_hash, k, skeleton) = load_skeleton(&session, q.skeleton.as_deref())?;
    let options = TearOptions { d: q.d, subsample_size: q.subsample_size, seed: q.seed, extra_k: q.extra_k };
    let hash = param_hash("tear/rank", &(skeleton_hash, options));
    let s = session.clone();
    state
        .compute(&session, "rank", hash, move || {
            let graph = s.graph(k)?;
            Ok(serde_json::to_value(rank_cuts(&s.cloud, &graph, &skeleton, &Candidates::AllEdges, &options)?)?)
        })
        .await
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectRequest {
    direction: Vec<f64>,
    #[serde(default = "default_subsample")]
    subsample_size: usize,
    #[serde(default)]
    seed: u64,
}

pub async fn project(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let req: ProjectRequest = parse_body(&body)?;
    if req.direction.len() != session.cloud.dim() {
        return Err(ApiError::invalid(
            "direction",
            format!("direction has {} components, cloud has dimension {}", req.direction.len(), session.cloud.dim()),
        ));
    }
    let hash = param_hash("project", &req);
    let s = session.clone();
    let h = hash.clone();
    state
        .compute(&session, "embedding", hash, move || {
            let dir = Direction::new(&req.direction)?;
            let e = linear_project(&s.cloud, &dir)?;
            let report = report_for(&s.cloud, &e, req.subsample_size, req.seed)?;
            Ok(json!({ "hash": h, "direction": dir, "embedding": e, "report": report }))
        })
        .await
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchQuery {
    m: usize,
    #[serde(default)]
    metric: Option<String>,
    #[serde(default = "default_subsample")]
    subsample_size: usize,
    #[serde(default)]
    seed: u64,
}

pub async fn project_search(State(state): State<AppState>, Path(id): Path<String>, Query(q): Query<SearchQuery>) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let metric: RankMetric = q.metric.as_deref().map(str::parse).transpose()?.unwrap_or_default();
    let options = ProjectionOptions { metric, subsample_size: q.subsample_size, seed: q.seed };
    let hash = param_hash("project/search", &(q.m, options));
    let s = session.clone();
    state
        .compute(&session, "search", hash, move || Ok(serde_json::to_value(projection_search(&s.cloud, q.m, &options)?)?))
        .await
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersistenceQuery {
    #[serde(default = "default_target")]
    target: String,
    #[serde(default = "default_subsample")]
    subsample_size: usize,
    #[serde(default)]
    seed: u64,
}

fn default_target() -> String {
    "input".to_string()
}

/// Diagrams of the input or of a stored embedding, on the same maxmin
/// subsample of the input the quality reports use.
pub async fn persistence(State(state): State<AppState>, Path(id): Path<String>, Query(q): Query<PersistenceQuery>) -> ApiResult<Response> {
    let session = state.session(&id)?;
    let coords: Option<PointCloud> = match q.target.as_str() {
        "input" => None,
        other => {
            let hash = other
                .strip_prefix("embedding:")
                .ok_or_else(|| ApiError::invalid("target", format!("expected input or embedding:{{hash}}, got {other:?}")))?;
            let artifact = session.artifact(hash).ok_or_else(|| ApiError::not_found(format!("embedding {hash}")))?;
            let e = artifact.body.get("embedding").ok_or_else(|| ApiError::invalid("target", format!("artifact {hash} holds no embedding")))?;
            Some(serde_json::from_value::<Embedding>(e.clone())?.coords)
        }
    };
    if q.subsample_size == 0 {
        return Err(ApiError::invalid("subsample_size", "must be at least 1"));
    }
    let hash = param_hash("persistence", &q);
    let s = session.clone();
    state
        .compute(&session, "persistence", hash, move || {
            let m = q.subsample_size.min(s.cloud.len());
            let idx = maxmin_subsample(&s.cloud, m, q.seed)?;
            let points = coords.as_ref().unwrap_or(&s.cloud).select(&idx)?;
            let diagrams = vr_persistence(&DistanceMatrix::euclidean(&points), 1, ScaleCap::Enclosing)?;
            let betti: Vec<_> = diagrams.iter().map(|d| persistent_betti(d, None)).collect();
            Ok(json!({ "target": q.target, "subsample_size": m, "diagrams": diagrams, "betti": betti }))
        })
        .await
}

pub async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

