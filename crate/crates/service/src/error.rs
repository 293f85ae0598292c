use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};

/// An error response: status plus a JSON body with `error` and, for
/// violated preconditions, `precondition`.
#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: Value,
}

impl ApiError {
    pub fn not_found(what: impl Into<String>) -> Self {
        let what = what.into();
        Self {
            status: StatusCode::NOT_FOUND,
            body: json!({ "error": format!("{what} not found") }),
        }
    }

    pub fn invalid(precondition: &str, message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            body: json!({ "error": message.into(), "precondition": precondition }),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            body: json!({ "error": message.into() }),
        }
    }
}

impl From<skelmap::Error> for ApiError {
    fn from(e: skelmap::Error) -> Self {
        use skelmap::Error as E;
        let message = e.to_string();
        match e {
            E::InvalidParameter { name, .. } => ApiError::invalid(name, message),
            E::Disconnected { component_sizes } => Self {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                body: json!({
                    "error": message,
                    "precondition": "graph_connected",
                    "component_sizes": component_sizes,
                }),
            },
            E::Unreachable => ApiError::invalid("distances_complete", message),
            E::DimensionMismatch(_) => ApiError::invalid("dimension", message),
            E::UndefinedCorrelation(_) => ApiError::invalid("correlation_defined", message),
            E::UnknownShape(_) => ApiError::invalid("shape", message),
            E::Parse(_) | E::Csv(_) | E::Json(_) => ApiError::invalid("input_format", message),
            E::Io(_) => ApiError::internal(message),
        }
    }
}

impl From<serde_json::Error> for ApiError {
    fn from(e: serde_json::Error) -> Self {
        ApiError::internal(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
