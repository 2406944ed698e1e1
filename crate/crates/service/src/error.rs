use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use navharness_core::dataset::{DatasetError, StoreError};
use serde_json::json;

/// Error body: `{"error": <code>, "message": <text>}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message)
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.code, "message": self.message }))).into_response()
    }
}

impl From<DatasetError> for ApiError {
    fn from(e: DatasetError) -> Self {
        let msg = e.to_string();
        match e {
            DatasetError::UnknownCandidate(_) => Self::not_found(msg),
            DatasetError::DuplicateScore(_) | DatasetError::WrongStatus { .. } | DatasetError::TargetsMet => {
                Self::conflict(msg)
            }
            DatasetError::TotalTooSmall(_)
            | DatasetError::BadThreshold(_)
            | DatasetError::EmptyBatch
            | DatasetError::ScoreOutOfRange { .. }
            | DatasetError::BadTestFraction(_)
            | DatasetError::BadSessionId(_) => Self::invalid(msg),
            DatasetError::NoCandidates { .. } | DatasetError::Backend(_) => {
                Self::new(StatusCode::BAD_GATEWAY, "generator_failed", msg)
            }
            DatasetError::MapMismatch { .. } | DatasetError::Io(_) => Self::internal(msg),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(_) | StoreError::BadId(_) => Self::not_found(e.to_string()),
            other => Self::internal(other.to_string()),
        }
    }
}
