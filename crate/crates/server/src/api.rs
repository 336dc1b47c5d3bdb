//! HTTP routes.
//!
//! | method | path | |
//! |---|---|---|
//! | GET  | `/datasets` | registered datasets |
//! | POST | `/sessions` | start a session from a `SessionConfig` body |
//! | GET  | `/sessions/{id}` | session summary |
//! | GET  | `/sessions/{id}/query` | unanswered part of the pending batch |
//! | POST | `/sessions/{id}/labels` | `[{sample_id, class_id}]`, buffered until the batch is complete |
//! | GET  | `/sessions/{id}/metrics` | per-round holdout accuracy and pool uncertainty |
//! | GET  | `/sessions/{id}/export` | labeled set as JSON, or CSV with `?format=csv` |
//!
//! Errors are `{"error": code, "message": text}` with a stable `code`.

use std::collections::HashSet;
use std::sync::Arc;

use activelabel::data::{LabelSource, Sample};
use activelabel::session::{RoundMetrics, SessionStatus};
use activelabel::Error as CoreError;
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::export::{export_rows, write_csv, ExportRow};
use crate::store::{Answer, LiveSession, SessionSlot, Store};

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn internal(err: impl std::fmt::Display) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", err.to_string())
    }

    fn unknown_session(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session {id:?}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.code, "message": self.message });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingItem {
    pub sample_id: u64,
    pub features: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub display_ref: Option<String>,
}

impl From<&Sample> for PendingItem {
    fn from(s: &Sample) -> Self {
        PendingItem {
            sample_id: s.id,
            features: s.features.clone(),
            display_ref: s.display_ref.clone(),
        }
    }
}

/// Client view of a session. Never carries ground-truth labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiSession {
    pub session_id: String,
    pub dataset: String,
    pub status: SessionStatus,
    /// Round being labeled, 1-based; equals `rounds` once complete.
    pub round: usize,
    pub rounds: usize,
    pub budget: usize,
    pub labeled_count: usize,
    pub buffered_count: usize,
    pub pending: Vec<PendingItem>,
    pub class_names: Vec<String>,
}

fn status_of(slot: &SessionSlot, live: &LiveSession) -> SessionStatus {
    if slot.is_training() {
        SessionStatus::Training
    } else {
        live.session.state().status
    }
}

fn api_session(slot: &SessionSlot, live: &LiveSession) -> ApiSession {
    let state = live.session.state();
    let pool = live.session.pool();
    let status = status_of(slot, live);
    ApiSession {
        session_id: state.session_id.clone(),
        dataset: state.config.dataset.clone(),
        status,
        round: (state.current_round + 1).min(state.plan.rounds),
        rounds: state.plan.rounds,
        budget: state.plan.total_budget,
        labeled_count: state.budget_labels(),
        buffered_count: live.buffered.len(),
        pending: live
            .unanswered()
            .into_iter()
            .map(|id| PendingItem::from(pool.get(id).expect("pending ids are pool ids")))
            .collect(),
        class_names: pool.class_names().to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub num_classes: usize,
    pub dim: usize,
    pub size: usize,
    pub class_names: Vec<String>,
    pub has_assets: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub session_id: String,
    pub status: SessionStatus,
    pub round: usize,
    pub pending: Vec<PendingItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsResponse {
    pub session_id: String,
    pub status: SessionStatus,
    /// The model after warmup, before any oracle label.
    pub initial: RoundMetrics,
    pub history: Vec<RoundMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportResponse {
    pub session_id: String,
    pub dataset: String,
    pub status: SessionStatus,
    pub class_names: Vec<String>,
    pub rows: Vec<ExportRow>,
}

#[derive(Debug, Default, Deserialize)]
pub struct ExportParams {
    #[serde(default)]
    pub format: Option<String>,
}

/// Router over `store`, optionally serving a static UI bundle for every
/// path no route claims. Dataset assets are served under
/// `/datasets/{name}/assets/`.
pub fn router(store: Arc<Store>, ui_dir: Option<&std::path::Path>) -> Router {
    let mut app = Router::new()
        .route("/datasets", get(list_datasets))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/query", get(get_query))
        .route("/sessions/{id}/labels", post(post_labels))
        .route("/sessions/{id}/metrics", get(get_metrics))
        .route("/sessions/{id}/export", get(get_export));
    for (name, registered) in store.datasets() {
        let Some(dir) = &registered.assets_dir else { continue };
        if name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            app = app.nest_service(&format!("/datasets/{name}/assets"), ServeDir::new(dir));
        } else {
            tracing::warn!(dataset = %name, "name is not URL-safe; assets not served");
        }
    }
    let app = app.with_state(store);
    match ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

async fn list_datasets(State(store): State<Arc<Store>>) -> Json<Vec<DatasetInfo>> {
    Json(
        store
            .datasets()
            .iter()
            .map(|(name, r)| DatasetInfo {
                name: name.clone(),
                num_classes: r.dataset.num_classes(),
                dim: r.dataset.dim(),
                size: r.dataset.len(),
                class_names: r.dataset.class_names().to_vec(),
                has_assets: r.assets_dir.is_some(),
            })
            .collect(),
    )
}

fn config_error(err: CoreError) -> ApiError {
    match err {
        CoreError::BudgetExceedsPool { .. } => {
            ApiError::new(StatusCode::BAD_REQUEST, "budget_exceeds_pool", err.to_string())
        }
        CoreError::InvalidParameter(_) | CoreError::InvalidBudget(_) => {
            ApiError::new(StatusCode::BAD_REQUEST, "invalid_config", err.to_string())
        }
        other => ApiError::internal(other),
    }
}

async fn create_session(State(store): State<Arc<Store>>, body: Bytes) -> ApiResult<(StatusCode, Json<ApiSession>)> {
    let config: activelabel::session::SessionConfig = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_config", e.to_string()))?;
    let registered = store.dataset(&config.dataset).cloned().ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_dataset",
            format!("no dataset {:?}", config.dataset),
        )
    })?;
    config.validate().map_err(config_error)?;

    let _creating = store.create.lock().await;
    let id = store.next_session_id();
    let state_dir = store.state_dir().to_path_buf();
    let live = tokio::task::spawn_blocking(move || -> ApiResult<LiveSession> {
        let session = activelabel::session::Session::start(id, config, &registered.dataset).map_err(config_error)?;
        let live = LiveSession {
            session,
            buffered: Vec::new(),
        };
        live.persist(&state_dir).map_err(ApiError::internal)?;
        Ok(live)
    })
    .await
    .map_err(ApiError::internal)??;
    tracing::info!(session = live.id(), "created session");
    let id = live.id().to_string();
    store.insert(live);
    let slot = store.session(&id).expect("just inserted");
    let snapshot = slot.snapshot();
    Ok((StatusCode::CREATED, Json(api_session(&slot, &snapshot))))
}

fn slot(store: &Store, id: &str) -> ApiResult<Arc<SessionSlot>> {
    store.session(id).ok_or_else(|| ApiError::unknown_session(id))
}

async fn get_session(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Json<ApiSession>> {
    let slot = slot(&store, &id)?;
    let live = slot.snapshot();
    Ok(Json(api_session(&slot, &live)))
}

async fn get_query(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Json<QueryResponse>> {
    let slot = slot(&store, &id)?;
    let live = slot.snapshot();
    let view = api_session(&slot, &live);
    Ok(Json(QueryResponse {
        session_id: view.session_id,
        status: view.status,
        round: view.round,
        pending: view.pending,
    }))
}

/// Checks a request against the committed snapshot without touching it.
fn check_answers(live: &LiveSession, answers: &[Answer]) -> ApiResult<()> {
    let state = live.session.state();
    if state.status == SessionStatus::Complete {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "session_complete",
            "session is complete",
        ));
    }
    if answers.is_empty() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid_body",
            "no answers given",
        ));
    }
    let labeled = state.labeled_ids();
    let k = live.session.pool().num_classes();
    let mut seen = HashSet::new();
    for a in answers {
        let id = a.sample_id;
        if !live.session.pool().contains(id) {
            return Err(ApiError::new(
                StatusCode::NOT_FOUND,
                "unknown_sample",
                format!("no sample {id} in the pool"),
            ));
        }
        if labeled.contains(&id) || live.is_buffered(id) || !seen.insert(id) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "already_answered",
                format!("sample {id} is already answered"),
            ));
        }
        if !state.pending_query.contains(&id) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "not_pending",
                format!("sample {id} is not pending"),
            ));
        }
        if a.class_id >= k {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "class_out_of_range",
                format!("class {} out of range for {k} classes", a.class_id),
            ));
        }
    }
    Ok(())
}

async fn post_labels(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<ApiSession>> {
    let answers: Vec<Answer> = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", e.to_string()))?;
    let slot = slot(&store, &id)?;
    let _guard = slot.write.lock().await;
    let committed = slot.snapshot();
    check_answers(&committed, &answers)?;

    let mut next = (*committed).clone();
    next.buffered.extend_from_slice(&answers);
    let batch = next.complete_batch();
    if batch.is_some() {
        slot.set_training(true);
    }
    let state_dir = store.state_dir().to_path_buf();
    let result = tokio::task::spawn_blocking(move || -> ApiResult<LiveSession> {
        if let Some(batch) = batch {
            next.session
                .submit_labels(&batch, LabelSource::Human)
                .map_err(ApiError::internal)?;
            next.buffered.clear();
        }
        next.persist(&state_dir).map_err(ApiError::internal)?;
        Ok(next)
    })
    .await
    .map_err(ApiError::internal);
    slot.set_training(false);
    let next = result??;
    slot.commit(next);
    let live = slot.snapshot();
    Ok(Json(api_session(&slot, &live)))
}

async fn get_metrics(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Json<MetricsResponse>> {
    let slot = slot(&store, &id)?;
    let live = slot.snapshot();
    let state = live.session.state();
    Ok(Json(MetricsResponse {
        session_id: state.session_id.clone(),
        status: status_of(&slot, &live),
        initial: state.initial.clone(),
        history: state.history.clone(),
    }))
}

async fn get_export(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    Query(params): Query<ExportParams>,
) -> ApiResult<Response> {
    let slot = slot(&store, &id)?;
    let live = slot.snapshot();
    let status = status_of(&slot, &live);
    let rows = export_rows(&live.session);
    match params.format.as_deref() {
        None | Some("json") => {
            let state = live.session.state();
            Ok(Json(ExportResponse {
                session_id: state.session_id.clone(),
                dataset: state.config.dataset.clone(),
                status,
                class_names: live.session.pool().class_names().to_vec(),
                rows,
            })
            .into_response())
        }
        Some("csv") => {
            let mut buf = Vec::new();
            write_csv(&mut buf, live.session.pool().dim(), &rows).map_err(ApiError::internal)?;
            let status_text = serde_json::to_value(status).map_err(ApiError::internal)?;
            let mut response = (
                [(
                    header::CONTENT_TYPE,
                    HeaderValue::from_static("text/csv; charset=utf-8"),
                )],
                buf,
            )
                .into_response();
            if let Some(text) = status_text.as_str() {
                response.headers_mut().insert(
                    "x-session-status",
                    HeaderValue::from_str(text).map_err(ApiError::internal)?,
                );
            }
            Ok(response)
        }
        Some(other) => Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid_format",
            format!("unknown export format {other:?}; use json or csv"),
        )),
    }
}
