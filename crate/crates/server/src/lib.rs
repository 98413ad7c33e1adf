//! HTTP front end over `bimodal-core`.
//!
//! Each session lives in a slot with two locks: an async mutex that
//! serializes mutations in arrival order, and a short-lived `RwLock` over the
//! committed state. A drop works on a clone and swaps it in only on success,
//! so readers always see a consistent snapshot and failures leave nothing
//! behind.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bimodal_core::dataset::DatasetSource;
use bimodal_core::llm::Provider;
use bimodal_core::schema::{schema, SCHEMA_NAMES};
use bimodal_core::service::api::{
    CreateSessionRequest, DatasetInfo, DropRequest, ErrorBody, SaveResponse, SessionSummary,
};
use bimodal_core::service::{
    build_provider, create_session, load_session, post_drop, save_session, PacketSpec, ServiceConfig, ServiceError,
};
use bimodal_core::{ChartSpec, Dataset, DragPacket, Session, StateDelta};
use indexmap::IndexMap;
use serde_json::json;
use tower_http::services::ServeDir;

struct Slot {
    mutation: tokio::sync::Mutex<()>,
    state: RwLock<Session>,
}

impl Slot {
    fn new(session: Session) -> Arc<Self> {
        Arc::new(Self {
            mutation: tokio::sync::Mutex::new(()),
            state: RwLock::new(session),
        })
    }

    fn snapshot(&self) -> Session {
        self.state.read().expect("session lock poisoned").clone()
    }
}

pub struct AppState {
    provider: Arc<dyn Provider>,
    max_retries: u32,
    datasets: IndexMap<String, Dataset>,
    session_dir: PathBuf,
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
}

impl AppState {
    pub fn new(
        provider: Arc<dyn Provider>,
        max_retries: u32,
        datasets: IndexMap<String, Dataset>,
        session_dir: impl Into<PathBuf>,
    ) -> Self {
        Self {
            provider,
            max_retries,
            datasets,
            session_dir: session_dir.into(),
            sessions: RwLock::new(HashMap::new()),
        }
    }

    /// Builds the provider and loads every configured dataset up front, so
    /// configuration problems surface at startup.
    pub fn from_config(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let provider = build_provider(&config.provider)?;
        let mut datasets = IndexMap::new();
        for entry in &config.datasets {
            let ds = DatasetSource::from_json_file(&entry.source).and_then(|s| s.load(None))?;
            datasets.insert(entry.id.clone(), ds);
        }
        Ok(Self::new(provider, config.max_retries, datasets, &config.session_dir))
    }

    fn session_path(&self, id: &str) -> PathBuf {
        self.session_dir.join(format!("{id}.json"))
    }

    /// Looks a session up in memory, falling back to a saved file.
    fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        if let Some(slot) = self.sessions.read().expect("registry poisoned").get(id) {
            return Ok(slot.clone());
        }
        let safe = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-');
        let path = self.session_path(id);
        if !safe || !path.is_file() {
            return Err(ServiceError::UnknownSession(id.to_string()).into());
        }
        let session = load_session(&path)?;
        let mut registry = self.sessions.write().expect("registry poisoned");
        Ok(registry.entry(id.to_string()).or_insert_with(|| Slot::new(session)).clone())
    }
}

/// A service error rendered as `{code, message}` with a matching status.
#[derive(Debug)]
pub struct ApiError(pub ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        Self(e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self(ServiceError::Json(e.body_text()))
    }
}

pub fn status_for(code: &str) -> StatusCode {
    match code {
        "unknown_session" | "unknown_dataset" | "unknown_chart" | "unknown_schema" => StatusCode::NOT_FOUND,
        "transport_error" | "provider_auth" | "missing_fixture" | "llm_failure" => StatusCode::BAD_GATEWAY,
        "io_error" | "config_error" => StatusCode::INTERNAL_SERVER_ERROR,
        "malformed_json" => StatusCode::BAD_REQUEST,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody::from(&self.0);
        (status_for(&body.code), Json(body)).into_response()
    }
}

type Shared = Arc<AppState>;
type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(state: Shared, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/healthz", get(|| async { Json(json!({"status": "ok"})) }))
        .route("/datasets", get(list_datasets))
        .route("/schemas", get(|| async { Json(SCHEMA_NAMES) }))
        .route("/schemas/{name}", get(get_schema))
        .route("/sessions", get(list_sessions).post(post_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/charts", get(get_charts))
        .route("/sessions/{id}/packets", post(post_packet))
        .route("/sessions/{id}/drops", post(post_drop_handler))
        .route("/sessions/{id}/save", post(post_save))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

async fn list_datasets(State(state): State<Shared>) -> Json<Vec<DatasetInfo>> {
    Json(state.datasets.iter().map(|(id, ds)| DatasetInfo::new(id, ds)).collect())
}

async fn get_schema(UrlPath(name): UrlPath<String>) -> Response {
    let name = name.trim_end_matches(".json");
    match schema(name) {
        Some(s) => Json(s).into_response(),
        None => {
            let body = ErrorBody {
                code: "unknown_schema".into(),
                message: format!("no schema named {name}"),
            };
            (StatusCode::NOT_FOUND, Json(body)).into_response()
        }
    }
}

async fn list_sessions(State(state): State<Shared>) -> Json<Vec<SessionSummary>> {
    let slots: Vec<Arc<Slot>> = state.sessions.read().expect("registry poisoned").values().cloned().collect();
    let mut out: Vec<SessionSummary> = slots.iter().map(|s| SessionSummary::from(&s.snapshot())).collect();
    out.sort_by(|a, b| a.updated_at.cmp(&b.updated_at).then_with(|| a.id.cmp(&b.id)));
    Json(out)
}

async fn post_session(
    State(state): State<Shared>,
    body: Result<Json<CreateSessionRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<Session>), ApiError> {
    let Json(req) = body?;
    let dataset = state
        .datasets
        .get(&req.dataset)
        .cloned()
        .ok_or_else(|| ServiceError::UnknownDataset(req.dataset.clone()))?;
    let provider = state.provider.clone();
    let retries = state.max_retries;
    let session = tokio::task::spawn_blocking(move || create_session(dataset, &req.goal, &*provider, retries))
        .await
        .expect("generation task panicked")?;
    state
        .sessions
        .write()
        .expect("registry poisoned")
        .insert(session.id().to_string(), Slot::new(session.clone()));
    Ok((StatusCode::CREATED, Json(session)))
}

async fn get_session(State(state): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Session> {
    Ok(Json(state.slot(&id)?.snapshot()))
}

async fn get_charts(State(state): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Vec<ChartSpec>> {
    let slot = state.slot(&id)?;
    let charts = slot.state.read().expect("session lock poisoned").charts().to_vec();
    Ok(Json(charts))
}

/// Resolves a selection to the packet a drop would carry. Read-only.
async fn post_packet(
    State(state): State<Shared>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<PacketSpec>, JsonRejection>,
) -> ApiResult<DragPacket> {
    let Json(spec) = body?;
    let slot = state.slot(&id)?;
    let session = slot.state.read().expect("session lock poisoned");
    Ok(Json(spec.resolve(&session)?))
}

async fn post_drop_handler(
    State(state): State<Shared>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<DropRequest>, JsonRejection>,
) -> ApiResult<StateDelta> {
    let Json(req) = body?;
    let slot = state.slot(&id)?;
    let _turn = slot.mutation.lock().await;
    let mut working = slot.snapshot();
    let provider = state.provider.clone();
    let retries = state.max_retries;
    let (working, result) = tokio::task::spawn_blocking(move || {
        let result = req
            .packet
            .resolve(&working)
            .and_then(|packet| post_drop(&mut working, &packet, &req.target, &*provider, retries));
        (working, result)
    })
    .await
    .expect("drop task panicked");
    let delta = result?;
    *slot.state.write().expect("session lock poisoned") = working;
    Ok(Json(delta))
}

async fn post_save(State(state): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<SaveResponse> {
    let slot = state.slot(&id)?;
    let session = slot.snapshot();
    let path = state.session_path(&id);
    tokio::task::spawn_blocking({
        let path = path.clone();
        move || save_session(&session, &path)
    })
    .await
    .expect("save task panicked")?;
    Ok(Json(SaveResponse {
        path: path.display().to_string(),
    }))
}

