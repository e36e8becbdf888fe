//! HTTP/JSON retrieval service over a loaded graph and vector index.
//!
//! Read endpoints never change state. `POST /fuse` and `POST /complete` are
//! only routed when mutations are enabled; they take the write lock for the
//! whole batch.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use mathkg_core::completion::{
    complete_kg, default_rules, parse_knowledge_points, two_stage_retrieve, CompletionError, KnowledgePoint,
};
use mathkg_core::embedding::{Embedder, EmbeddingError};
use mathkg_core::fusion::{fuse, FusionError};
use mathkg_core::index::{build_vd, IndexError, SearchHit, VectorDb};
use mathkg_core::llm::LlmBackend;
use mathkg_core::store::load_kg;
use mathkg_core::{EntityId, KnowledgeGraph};
use serde::{Deserialize, Serialize};

use crate::config::ToolkitConfig;

pub struct ServiceState {
    pub kg: KnowledgeGraph,
    /// Indexes by strategy tag; the first one loaded is the default.
    pub vds: BTreeMap<String, VectorDb>,
    pub default_strategy: String,
    pub embedder: Arc<dyn Embedder>,
    pub llm: Option<Arc<dyn LlmBackend>>,
    pub cfg: ToolkitConfig,
}

impl ServiceState {
    pub fn new(kg: KnowledgeGraph, vds: Vec<VectorDb>, embedder: Arc<dyn Embedder>, cfg: ToolkitConfig) -> Self {
        let default_strategy = vds.first().map(|v| v.strategy_tag.as_str().to_string()).unwrap_or_default();
        ServiceState {
            kg,
            vds: vds.into_iter().map(|v| (v.strategy_tag.as_str().to_string(), v)).collect(),
            default_strategy,
            embedder,
            llm: None,
            cfg,
        }
    }

    fn vd(&self, strategy: Option<&str>) -> Result<&VectorDb, ApiError> {
        let tag = strategy.unwrap_or(&self.default_strategy);
        self.vds
            .get(tag)
            .ok_or_else(|| ApiError::bad_request(format!("no index loaded for strategy `{tag}`")))
    }
}

pub type Shared = Arc<RwLock<ServiceState>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        self.status
    }

    pub fn body(&self) -> &ErrorBody {
        &self.body
    }

    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                error: code.to_string(),
                message: message.into(),
            },
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    fn unavailable(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "backend_unavailable", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<EmbeddingError> for ApiError {
    fn from(e: EmbeddingError) -> Self {
        match e {
            EmbeddingError::BackendUnavailable(m) => ApiError::unavailable(m),
            other => ApiError::bad_request(other.to_string()),
        }
    }
}

impl From<IndexError> for ApiError {
    fn from(e: IndexError) -> Self {
        ApiError::bad_request(e.to_string())
    }
}

impl From<CompletionError> for ApiError {
    fn from(e: CompletionError) -> Self {
        match e {
            CompletionError::BackendUnavailable { message, .. } => ApiError::unavailable(message),
            CompletionError::Embedding(e) => e.into(),
            other => ApiError::bad_request(other.to_string()),
        }
    }
}

impl From<FusionError> for ApiError {
    fn from(e: FusionError) -> Self {
        match e {
            FusionError::Embedding(e) => e.into(),
            other => ApiError::bad_request(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, axum::Json(self.body)).into_response()
    }
}

fn json_text(text: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], text).into_response()
}

fn json<T: Serialize>(v: &T) -> Response {
    json_text(serde_json::to_string(v).expect("serializable"))
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

/// Runs `f` on the blocking pool: backends may use blocking HTTP clients.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

pub fn router(state: Shared, allow_mutations: bool) -> Router {
    let mut r = Router::new()
        .route("/entities", get(find_entity))
        .route("/entities/{id}", get(get_entity))
        .route("/search", post(search))
        .route("/retrieve", post(retrieve))
        .route("/stats", get(stats));
    if allow_mutations {
        r = r.route("/fuse", post(fuse_kg)).route("/complete", post(complete));
    }
    r.fallback(|| async { ApiError::not_found("no such endpoint") }).with_state(state)
}

fn read(state: &Shared) -> std::sync::RwLockReadGuard<'_, ServiceState> {
    state.read().unwrap_or_else(|p| p.into_inner())
}

async fn get_entity(State(state): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let id: u64 = id.parse().map_err(|_| ApiError::bad_request(format!("bad entity id `{id}`")))?;
    let s = read(&state);
    let e = s
        .kg
        .entity(EntityId(id))
        .ok_or_else(|| ApiError::not_found(format!("entity {id} does not exist")))?;
    Ok(json(e))
}

async fn find_entity(
    State(state): State<Shared>,
    Query(q): Query<BTreeMap<String, String>>,
) -> Result<Response, ApiError> {
    let title = q.get("title").ok_or_else(|| ApiError::bad_request("missing `title` query parameter"))?;
    let s = read(&state);
    let id = s
        .kg
        .exact_lookup(title)
        .ok_or_else(|| ApiError::not_found(format!("no entity titled `{title}`")))?;
    Ok(json(s.kg.entity(id).expect("lookup returns live ids")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchRequest {
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub entity_id: Option<u64>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub strategy: Option<String>,
}

fn default_k() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub strategy: String,
    pub hits: Vec<SearchHit>,
}

/// Text queries embed the raw text; entity queries use the stored vector and
/// leave the entity itself out.
pub fn run_search(s: &ServiceState, req: &SearchRequest) -> Result<SearchResponse, ApiError> {
    let vd = s.vd(req.strategy.as_deref())?;
    let (query, exclude) = match (&req.text, req.entity_id) {
        (Some(text), None) => (s.embedder.embed_text(text)?.as_slice().to_vec(), BTreeSet::new()),
        (None, Some(id)) => {
            let id = EntityId(id);
            let v = vd
                .vector(id)
                .ok_or_else(|| ApiError::not_found(format!("entity {id} has no vector")))?;
            (v, BTreeSet::from([id]))
        }
        _ => return Err(ApiError::bad_request("give exactly one of `text` and `entity_id`")),
    };
    let hits = vd.top_k(&query, req.k, &exclude)?;
    Ok(SearchResponse {
        strategy: vd.strategy_tag.as_str().to_string(),
        hits,
    })
}

async fn search(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: SearchRequest = parse_body(&body)?;
    blocking(move || run_search(&read(&state), &req).map(|r| json(&r))).await
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum PointSpec {
    Text(String),
    Point(KnowledgePoint),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RetrieveRequest {
    knowledge_points: Vec<PointSpec>,
    #[serde(default)]
    fuzzy_k: Option<usize>,
    #[serde(default)]
    strategy: Option<String>,
}

async fn retrieve(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: RetrieveRequest = parse_body(&body)?;
    let mut points = Vec::with_capacity(req.knowledge_points.len());
    for p in req.knowledge_points {
        match p {
            PointSpec::Point(p) => points.push(p),
            PointSpec::Text(t) => points.extend(
                parse_knowledge_points(&t).map_err(|e| ApiError::bad_request(format!("knowledge point: {e}")))?,
            ),
        }
    }
    blocking(move || {
        let s = read(&state);
        let mut cfg = s.cfg.completion_config();
        if let Some(k) = req.fuzzy_k {
            if k == 0 {
                return Err(ApiError::bad_request("fuzzy_k must be at least 1"));
            }
            cfg.fuzzy_k = k;
        }
        let vd = s.vd(req.strategy.as_deref())?;
        let bundle = two_stage_retrieve(&points, &s.kg, vd, s.embedder.as_ref(), &cfg, &BTreeSet::new())?;
        Ok(json(&bundle))
    })
    .await
}

async fn stats(State(state): State<Shared>) -> Response {
    let s = read(&state);
    json(&s.kg.graph_stats(s.cfg.simple_cycle_cap))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FuseRequest {
    input_kg: std::path::PathBuf,
}

/// Rebuilds the default index after a mutation so searches see new nodes.
fn refresh_default_vd(s: &mut ServiceState) -> Result<(), ApiError> {
    let cfg = s.cfg.embed;
    let (vd, _) = build_vd(&s.kg, s.embedder.as_ref(), &cfg)?;
    let tag = vd.strategy_tag.as_str().to_string();
    if s.default_strategy.is_empty() {
        s.default_strategy = tag.clone();
    }
    s.vds.insert(tag, vd);
    Ok(())
}

async fn fuse_kg(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: FuseRequest = parse_body(&body)?;
    blocking(move || {
        let input = load_kg(&req.input_kg).map_err(|e| ApiError::bad_request(format!("input_kg: {e}")))?;
        let mut s = state.write().unwrap_or_else(|p| p.into_inner());
        let llm = s.llm.clone().ok_or_else(|| ApiError::unavailable("no LLM backend configured"))?;
        let cfg = s.cfg.fusion_config();
        let embedder = s.embedder.clone();
        let report = fuse(&input, &mut s.kg, embedder.as_ref(), llm.as_ref(), &cfg)?;
        refresh_default_vd(&mut s)?;
        Ok(json(&report))
    })
    .await
}

async fn complete(State(state): State<Shared>) -> Result<Response, ApiError> {
    blocking(move || {
        let mut s = state.write().unwrap_or_else(|p| p.into_inner());
        let llm = s.llm.clone().ok_or_else(|| ApiError::unavailable("no LLM backend configured"))?;
        let cfg = s.cfg.completion_config();
        let embedder = s.embedder.clone();
        let vd = s.vd(None)?.clone();
        let report = complete_kg(&mut s.kg, &vd, embedder.as_ref(), llm.as_ref(), &default_rules(), &cfg)?;
        refresh_default_vd(&mut s)?;
        Ok(json(&report))
    })
    .await
}

pub async fn serve(state: Shared, allow_mutations: bool, bind: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state, allow_mutations)).await
}
