use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

use alignlab::certify::SessionError;

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn not_found(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            code: "not_found",
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "bad_request",
            message: message.into(),
        }
    }

    pub fn conflict(code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::CONFLICT,
            code,
            message: message.into(),
        }
    }

    pub fn storage(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            code: "storage",
            message: message.into(),
        }
    }
}

impl From<alignlab::Error> for ApiError {
    fn from(e: alignlab::Error) -> Self {
        match e {
            alignlab::Error::Io(_) | alignlab::Error::Json(_) => ApiError::storage(e.to_string()),
            other => ApiError::bad_request(other.to_string()),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let code = match &e {
            SessionError::Closed(_) => "session_closed",
            SessionError::Duplicate { .. } => "duplicate_judgment",
            SessionError::OutOfOrder { .. } => "out_of_order",
            SessionError::ForeignSource(_) => "foreign_source",
            SessionError::Storage(inner) => return ApiError::storage(inner.to_string()),
        };
        ApiError::conflict(code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({ "code": self.code, "message": self.message })),
        )
            .into_response()
    }
}
