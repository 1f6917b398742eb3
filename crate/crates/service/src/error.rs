use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use lexlabel::{Error, ErrorFamily};
use serde_json::json;

/// An error response: status plus `{"error": kind, "message": text}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn bad_request(kind: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            kind,
            message: message.into(),
        }
    }
}

fn status_for(e: &Error) -> StatusCode {
    match e {
        Error::InvalidK(_) | Error::EmptyText { .. } | Error::EmptyLabelId | Error::EmptyDescription(_) => {
            StatusCode::BAD_REQUEST
        }
        Error::DuplicateLabel(_) | Error::EmptyIndex => StatusCode::CONFLICT,
        Error::UnknownLabel(_) => StatusCode::NOT_FOUND,
        Error::BatchItem { source, .. } => status_for(source),
        other => match other.family() {
            ErrorFamily::Vector => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorFamily::Service => StatusCode::SERVICE_UNAVAILABLE,
            ErrorFamily::Taxonomy | ErrorFamily::Search | ErrorFamily::Data | ErrorFamily::Format => {
                StatusCode::BAD_REQUEST
            }
            ErrorFamily::Io => StatusCode::INTERNAL_SERVER_ERROR,
        },
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError {
            status: status_for(&e),
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.kind, "message": self.message}))).into_response()
    }
}
