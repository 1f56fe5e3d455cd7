use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};
use trajex_core::annot::AnnotError;

/// JSON error response `{"error": …, …}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, body: json!({ "error": message.into() }) }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.body[key] = value.into();
        self
    }

    pub fn not_found(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, what)
    }

    pub fn internal(message: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message.to_string())
    }
}

impl From<AnnotError> for ApiError {
    fn from(e: AnnotError) -> Self {
        match e {
            AnnotError::SchemaViolation { path, message } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "schema violation").with("path", path).with("message", message)
            }
            AnnotError::Parse { message, .. } => ApiError::new(StatusCode::BAD_REQUEST, "malformed JSON").with("message", message),
            AnnotError::Io { .. } => ApiError::internal(e),
            other => ApiError::new(StatusCode::CONFLICT, "project unavailable").with("message", other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}
