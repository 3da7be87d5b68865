//! JSON routes over the pipeline and the feedback buffer.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::feedback::{FeedbackRecord, FeedbackStore, StatsReport};
use crate::pipeline::{Pipeline, SessionError, SessionResponse};

#[derive(Debug, Clone)]
pub struct AppState {
    pub pipeline: Arc<Pipeline>,
    pub feedback: Arc<FeedbackStore>,
}

impl AppState {
    pub fn new(pipeline: Pipeline, feedback: FeedbackStore) -> Self {
        Self {
            pipeline: Arc::new(pipeline),
            feedback: Arc::new(feedback),
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct SessionRequest {
    pub text: String,
}

#[derive(Debug, Serialize)]
pub struct Health {
    pub status: &'static str,
    pub corpus_size: usize,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, e.body_text())
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match e {
            SessionError::EmptyText | SessionError::TextTooLong => StatusCode::BAD_REQUEST,
            SessionError::IndexUnavailable => StatusCode::SERVICE_UNAVAILABLE,
            SessionError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<SessionRequest>, JsonRejection>,
) -> Result<Json<SessionResponse>, ApiError> {
    let Json(req) = body?;
    Ok(Json(state.pipeline.create_session(&req.text).await?))
}

async fn record_feedback(
    State(state): State<AppState>,
    body: Result<Json<FeedbackRecord>, JsonRejection>,
) -> Result<StatusCode, ApiError> {
    let Json(record) = body?;
    state
        .feedback
        .record(record)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
    Ok(StatusCode::NO_CONTENT)
}

async fn stats(State(state): State<AppState>) -> Json<StatsReport> {
    Json(state.feedback.report())
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok",
        corpus_size: state.pipeline.index.corpus_size(),
    })
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/session", post(create_session))
        .route("/api/feedback", post(record_feedback))
        .route("/api/stats", get(stats))
        .route("/api/health", get(health))
        .with_state(state)
}
