use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use thematica_core::eval::EvalError;
use thematica_core::summarize::SummarizeError;
use thematica_core::{CorpusError, GraphError, ProviderError, StoreError, SuggestError};

/// Wire shape of every error response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.to_string(),
                message: message.into(),
                details: None,
            },
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.body.details = Some(details);
        self
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "validation_error", message)
    }

    /// A precondition failed in the engine; the engine's code goes in
    /// `details.reason`.
    pub fn rejected(code: &str, message: impl Into<String>) -> Self {
        Self::validation(message).with_details(json!({"reason": code}))
    }

    pub fn workspace_missing(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "workspace_missing", format!("no workspace `{id}`"))
    }

    pub fn revision_conflict(expected: u64, current: u64) -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "revision_conflict",
            format!("expected revision {expected}, workspace is at {current}"),
        )
        .with_details(json!({"expected_revision": expected, "current_revision": current}))
    }

    /// Maps an engine error code to its HTTP status.
    pub fn engine(code: &str, message: impl Into<String>) -> Self {
        let status = match code {
            c if c.starts_with("unknown_") && c != "unknown_schema_version" => StatusCode::NOT_FOUND,
            "suggestion_stale" | "suggestion_not_pending" | "nothing_to_undo" | "delta_conflict" => StatusCode::CONFLICT,
            "provider_unreachable" | "timeout" => StatusCode::BAD_GATEWAY,
            "io_failure" => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::new(status, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

macro_rules! engine_error {
    ($($ty:ty),*) => {
        $(impl From<$ty> for ApiError {
            fn from(e: $ty) -> Self {
                ApiError::engine(e.code(), e.to_string())
            }
        })*
    };
}

engine_error!(CorpusError, GraphError, StoreError, SuggestError, ProviderError, SummarizeError, EvalError);

pub type ApiResult<T> = Result<T, ApiError>;
