//! JSON API consumed by the review UI.

use std::sync::Arc;

use axum::body::Body;
use axum::extract::{Path, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cinepipe_core::clients::{Digest, StoreError};
use serde::Serialize;
use serde_json::json;

use crate::record::{GateState, RunRecord, Stage};
use crate::runner::{Pipeline, Rejection};
use crate::PipelineError;

#[derive(Clone)]
pub struct AppState {
    pub pipeline: Arc<Pipeline>,
    /// Required bearer token, when set.
    pub token: Option<String>,
    /// Continue a run in the background after approval.
    pub auto_resume: bool,
}

#[derive(Debug)]
pub struct ApiError(PipelineError);

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            PipelineError::UnknownRun(_) | PipelineError::Store(StoreError::NotFound(_)) => StatusCode::NOT_FOUND,
            PipelineError::Conflict(_) => StatusCode::CONFLICT,
            PipelineError::BadRequest(_) | PipelineError::Store(StoreError::InvalidDigest(_)) => {
                StatusCode::BAD_REQUEST
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, PipelineError> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(PipelineError::Invariant(format!("worker panicked: {e}"))))?
        .map_err(ApiError)
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub run_id: String,
    pub stage: Stage,
    pub paused: bool,
    pub gates: std::collections::BTreeMap<Stage, GateState>,
    pub failure: Option<String>,
    pub updated_at: chrono::DateTime<chrono::Utc>,
}

impl From<&RunRecord> for RunSummary {
    fn from(r: &RunRecord) -> Self {
        Self {
            run_id: r.run_id.clone(),
            stage: r.stage,
            paused: r.is_paused(),
            gates: r.gates.clone(),
            failure: r.failure.as_ref().map(|f| f.message.clone()),
            updated_at: r.updated_at,
        }
    }
}

fn parse_stage(s: &str) -> ApiResult<Stage> {
    match s.parse::<Stage>() {
        Ok(st @ (Stage::Screenplay | Stage::Storyboard | Stage::Clips | Stage::Transitions)) => Ok(st),
        _ => Err(ApiError(PipelineError::BadRequest(format!("{s:?} is not a reviewable stage")))),
    }
}

fn parse_digest(s: &str) -> ApiResult<Digest> {
    s.parse().map_err(|e: StoreError| ApiError(e.into()))
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn list_runs(State(st): State<AppState>) -> ApiResult<Json<Vec<RunSummary>>> {
    let p = st.pipeline.clone();
    let runs = blocking(move || p.store().list()).await?;
    Ok(Json(runs.iter().map(RunSummary::from).collect()))
}

async fn get_run(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<RunRecord>> {
    let p = st.pipeline.clone();
    Ok(Json(blocking(move || p.load(&id)).await?))
}

async fn run_events(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let p = st.pipeline.clone();
    let events = blocking(move || p.store().events(&id)).await?;
    Ok(Json(events).into_response())
}

async fn approve(State(st): State<AppState>, Path((id, stage)): Path<(String, String)>) -> ApiResult<Json<RunRecord>> {
    let stage = parse_stage(&stage)?;
    let p = st.pipeline.clone();
    let run_id = id.clone();
    let rec = blocking(move || p.approve(&run_id, stage)).await?;
    if st.auto_resume {
        let p = st.pipeline.clone();
        tokio::task::spawn_blocking(move || {
            if let Err(e) = p.run(&id) {
                log::error!("resuming {id} after approval failed: {e}");
            }
        });
    }
    Ok(Json(rec))
}

async fn reject(
    State(st): State<AppState>,
    Path((id, stage)): Path<(String, String)>,
    body: Option<Json<Rejection>>,
) -> ApiResult<Json<RunRecord>> {
    let stage = parse_stage(&stage)?;
    let rejection = body.map(|Json(r)| r).unwrap_or_default();
    let p = st.pipeline.clone();
    Ok(Json(blocking(move || p.reject(&id, stage, rejection)).await?))
}

async fn regenerate(
    State(st): State<AppState>,
    Path((id, stage)): Path<(String, String)>,
) -> ApiResult<Json<RunRecord>> {
    let stage = parse_stage(&stage)?;
    let p = st.pipeline.clone();
    Ok(Json(blocking(move || p.regenerate(&id, stage)).await?))
}

fn content_type(bytes: &[u8]) -> &'static str {
    if bytes.starts_with(b"P6") {
        "image/x-portable-pixmap"
    } else if bytes.starts_with(b"MCLP") {
        "application/x-cinepipe-clip"
    } else if bytes.first().is_some_and(|b| *b == b'{' || *b == b'[') {
        "application/json"
    } else {
        "application/octet-stream"
    }
}

async fn artifact(State(st): State<AppState>, Path(digest): Path<String>) -> ApiResult<Response> {
    let d = parse_digest(&digest)?;
    let p = st.pipeline.clone();
    let bytes = blocking(move || Ok(p.store().cas().get(&d)?)).await?;
    let mut resp = Response::new(Body::from(bytes.clone()));
    resp.headers_mut().insert(header::CONTENT_TYPE, HeaderValue::from_static(content_type(&bytes)));
    Ok(resp)
}

async fn artifact_provenance(State(st): State<AppState>, Path(digest): Path<String>) -> ApiResult<Response> {
    let d = parse_digest(&digest)?;
    let p = st.pipeline.clone();
    let prov = blocking(move || Ok(p.store().cas().provenance(&d)?)).await?;
    Ok(Json(prov).into_response())
}

async fn require_token(State(st): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &st.token {
        let expected = format!("Bearer {token}");
        let ok = req.headers().get(header::AUTHORIZATION).and_then(|v| v.to_str().ok()).is_some_and(|v| v == expected);
        if !ok {
            return (StatusCode::UNAUTHORIZED, Json(json!({ "error": "missing or invalid token" }))).into_response();
        }
    }
    next.run(req).await
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/api/runs", get(list_runs))
        .route("/api/runs/{id}", get(get_run))
        .route("/api/runs/{id}/provenance", get(run_events))
        .route("/api/runs/{id}/stages/{stage}/approve", post(approve))
        .route("/api/runs/{id}/stages/{stage}/reject", post(reject))
        .route("/api/runs/{id}/stages/{stage}/regenerate", post(regenerate))
        .route("/api/artifacts/{digest}", get(artifact))
        .route("/api/artifacts/{digest}/provenance", get(artifact_provenance))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token));
    Router::new().route("/api/health", get(health)).merge(api).with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(state: AppState, addr: std::net::SocketAddr) -> Result<(), PipelineError> {
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| PipelineError::Io(format!("{addr}: {e}")))?;
    log::info!("review API listening on {}", listener.local_addr().map_err(|e| PipelineError::Io(e.to_string()))?);
    axum::serve(listener, router(state)).await.map_err(|e| PipelineError::Io(e.to_string()))
}
