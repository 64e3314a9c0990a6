//! `/v1` HTTP API over a shared [`Workbench`].
//!
//! | method | path | body | response |
//! |---|---|---|---|
//! | GET | `/v1/health` | | status, model and image counts |
//! | GET | `/v1/models` | | model records |
//! | POST | `/v1/sessions` | optional `{canvas_w, canvas_h, seed}` | session (201) |
//! | GET | `/v1/sessions/{id}` | | session |
//! | POST | `/v1/sessions/{id}/cloud?format=xyz\|ply` | XYZ or ASCII PLY | session |
//! | GET | `/v1/sessions/{id}/view?dir=x,y,z&w=&h=` | | projected points + PNG |
//! | POST | `/v1/sessions/{id}/sketch?topk=` | PNG | hits |
//! | POST | `/v1/sessions/{id}/align` | `{model_id}` | alignment |
//! | POST | `/v1/sessions/{id}/contour?dir=x,y,z` | | PNG |
//! | POST | `/v1/sessions/{id}/export` | | OBJ text + metrics |
//!
//! Errors are `{"error": {"kind", "message", ...}}` with 400 (validation),
//! 404 (unknown session or model), 409 (illegal in the current state) or 500.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::session::{parse_direction, SessionError, Workbench, DEFAULT_CANVAS, DEFAULT_TOPK};

pub const BODY_LIMIT: usize = 64 << 20;

#[derive(Debug)]
pub struct ApiError(pub SessionError);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let e = self.0;
        let status = match e {
            SessionError::Validation(_) => StatusCode::BAD_REQUEST,
            SessionError::NotFound(_) => StatusCode::NOT_FOUND,
            SessionError::StateConflict { .. } => StatusCode::CONFLICT,
            SessionError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut body = json!({ "kind": e.kind(), "message": e.to_string() });
        if let SessionError::StateConflict { state, action } = &e {
            body["state"] = json!(state);
            body["action"] = json!(action);
        }
        (status, Json(json!({ "error": body }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn bad(e: impl std::fmt::Display) -> ApiError {
    ApiError(SessionError::Validation(e.to_string()))
}

/// Runs blocking engine work off the async executor.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, SessionError> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(SessionError::Internal(e.to_string())))?
        .map_err(ApiError)
}

pub fn router(bench: Arc<Workbench>) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/models", get(models))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/cloud", post(load_cloud))
        .route("/v1/sessions/{id}/view", get(get_view))
        .route("/v1/sessions/{id}/sketch", post(submit_sketch))
        .route("/v1/sessions/{id}/align", post(select_and_align))
        .route("/v1/sessions/{id}/contour", post(extract_contour))
        .route("/v1/sessions/{id}/export", post(export_model))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(bench)
}

async fn health(State(bench): State<Arc<Workbench>>) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "models": bench.models().len(),
        "images": bench.index().index.images().len(),
        "sessions": bench.session_count(),
    }))
}

async fn models(State(bench): State<Arc<Workbench>>) -> Json<serde_json::Value> {
    Json(json!({ "models": bench.models() }))
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    #[serde(default = "default_canvas")]
    pub canvas_w: usize,
    #[serde(default = "default_canvas")]
    pub canvas_h: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_canvas() -> usize {
    DEFAULT_CANVAS
}

async fn create_session(State(bench): State<Arc<Workbench>>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: CreateRequest = if body.iter().all(u8::is_ascii_whitespace) {
        serde_json::from_str("{}").expect("defaults")
    } else {
        serde_json::from_slice(&body).map_err(bad)?
    };
    let doc = bench.create_session(req.canvas_w, req.canvas_h, req.seed)?;
    Ok((StatusCode::CREATED, Json(doc)))
}

async fn get_session(State(bench): State<Arc<Workbench>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(bench.get_session(&id)?))
}

#[derive(Debug, Deserialize)]
struct CloudQuery {
    format: Option<String>,
}

async fn load_cloud(
    State(bench): State<Arc<Workbench>>,
    Path(id): Path<String>,
    query: Result<Query<CloudQuery>, QueryRejection>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let Query(q) = query.map_err(bad)?;
    let doc = blocking(move || bench.load_cloud(&id, &body, q.format.as_deref())).await?;
    Ok(Json(doc))
}

#[derive(Debug, Deserialize)]
struct ViewQuery {
    dir: String,
    w: Option<usize>,
    h: Option<usize>,
}

async fn get_view(
    State(bench): State<Arc<Workbench>>,
    Path(id): Path<String>,
    query: Result<Query<ViewQuery>, QueryRejection>,
) -> ApiResult<impl IntoResponse> {
    let Query(q) = query.map_err(bad)?;
    let direction = parse_direction(&q.dir)?;
    let size = match (q.w, q.h) {
        (None, None) => None,
        (w, h) => Some((w.or(h).unwrap_or(DEFAULT_CANVAS), h.or(w).unwrap_or(DEFAULT_CANVAS))),
    };
    let doc = blocking(move || bench.get_view(&id, direction, size)).await?;
    Ok(Json(doc))
}

#[derive(Debug, Deserialize)]
struct SketchQuery {
    topk: Option<usize>,
}

async fn submit_sketch(
    State(bench): State<Arc<Workbench>>,
    Path(id): Path<String>,
    query: Result<Query<SketchQuery>, QueryRejection>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let Query(q) = query.map_err(bad)?;
    let topk = q.topk.unwrap_or(DEFAULT_TOPK);
    let doc = blocking(move || bench.submit_sketch(&id, &body, topk)).await?;
    Ok(Json(doc))
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AlignRequest {
    pub model_id: u32,
}

async fn select_and_align(
    State(bench): State<Arc<Workbench>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let req: AlignRequest = serde_json::from_slice(&body).map_err(bad)?;
    let doc = blocking(move || bench.select_and_align(&id, req.model_id)).await?;
    Ok(Json(doc))
}

#[derive(Debug, Deserialize)]
struct ContourQuery {
    dir: String,
}

async fn extract_contour(
    State(bench): State<Arc<Workbench>>,
    Path(id): Path<String>,
    query: Result<Query<ContourQuery>, QueryRejection>,
) -> ApiResult<impl IntoResponse> {
    let Query(q) = query.map_err(bad)?;
    let direction = parse_direction(&q.dir)?;
    let png = blocking(move || bench.extract_contour(&id, direction)).await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png))
}

async fn export_model(State(bench): State<Arc<Workbench>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let doc = blocking(move || bench.export_model(&id)).await?;
    Ok(Json(doc))
}
