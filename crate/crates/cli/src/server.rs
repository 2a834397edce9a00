//! HTTP API for the scoring sessions.
//!
//! Routes:
//! - `GET  /api/participants/{p}/sessions/{k}/playlist`
//! - `GET  /api/participants/{p}/sessions/{k}/progress`
//! - `POST /api/votes`
//! - `GET  /api/training`
//! - `GET  /api/export.csv` (header `X-Export-Incomplete: true|false`)
//! - `GET  /healthz`
//!
//! Media files are served under `/media`, the scoring UI bundle at `/`.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use stvq_core::session::{Study, VoteRequest};
use stvq_core::Error;
use tower_http::services::ServeDir;
use tower_http::trace::TraceLayer;

pub const EXPORT_INCOMPLETE_HEADER: &str = "x-export-incomplete";

#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    pub media_dir: Option<PathBuf>,
    pub ui_dir: Option<PathBuf>,
}

/// Core errors mapped onto HTTP status codes, with a JSON body.
#[derive(Debug)]
pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match &self.0 {
            Error::NotFound(_) | Error::UnknownStimulus { .. } => StatusCode::NOT_FOUND,
            Error::Precondition(_) => StatusCode::PRECONDITION_FAILED,
            Error::Sequence { .. } | Error::Conflict(_) => StatusCode::CONFLICT,
            Error::Validation(_) | Error::InvalidArgument(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            tracing::error!(error = %self.0, "request failed");
        }
        let mut body = json!({ "error": self.0.to_string() });
        if let Error::Sequence { expected, position, .. } = &self.0 {
            body["expected"] = json!(expected);
            body["position"] = json!(position);
        }
        (status, Json(body)).into_response()
    }
}

type AppState = Arc<Study>;

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

async fn playlist(State(study): State<AppState>, Path((p, k)): Path<(u32, u8)>) -> Result<Response, ApiError> {
    Ok(Json(study.playlist(p, k, now_ms())?).into_response())
}

async fn progress(State(study): State<AppState>, Path((p, k)): Path<(u32, u8)>) -> Result<Response, ApiError> {
    Ok(Json(study.progress(p, k)?).into_response())
}

async fn training(State(study): State<AppState>) -> Response {
    Json(study.training()).into_response()
}

async fn vote(State(study): State<AppState>, Json(req): Json<VoteRequest>) -> Result<Response, ApiError> {
    // the vote log is fsynced on every append
    let ack = tokio::task::spawn_blocking(move || study.post_vote(&req, now_ms()))
        .await
        .map_err(|e| Error::Config(format!("vote task failed: {e}")))??;
    Ok((StatusCode::CREATED, Json(ack)).into_response())
}

async fn export(State(study): State<AppState>) -> Result<Response, ApiError> {
    let mut body = Vec::new();
    let summary = study.export(&mut body)?;
    let flag = HeaderValue::from_static(if summary.complete { "false" } else { "true" });
    Ok((
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("text/csv; charset=utf-8")),
            (header::HeaderName::from_static(EXPORT_INCOMPLETE_HEADER), flag),
        ],
        body,
    )
        .into_response())
}

pub fn router(study: Arc<Study>, opts: &ServeOptions) -> Router {
    let mut app = Router::new()
        .route("/api/participants/{p}/sessions/{k}/playlist", get(playlist))
        .route("/api/participants/{p}/sessions/{k}/progress", get(progress))
        .route("/api/votes", post(vote))
        .route("/api/training", get(training))
        .route("/api/export.csv", get(export))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(study);
    if let Some(media) = &opts.media_dir {
        app = app.nest_service("/media", ServeDir::new(media));
    }
    if let Some(ui) = &opts.ui_dir {
        app = app.fallback_service(ServeDir::new(ui).append_index_html_on_directories(true));
    }
    app.layer(TraceLayer::new_for_http())
}
