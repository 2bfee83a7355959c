use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use ctgs_core::decoder::DecodeError;
use ctgs_core::filter::FilterError;
use ctgs_core::LmError;
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("no session with id {0}")]
    UnknownSession(String),
    #[error("no model registered as {0:?}")]
    UnknownModel(String),
    #[error("{0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("no such endpoint")]
    NoSuchEndpoint,
    #[error("internal error: {0}")]
    Internal(String),
}

impl ApiError {
    /// Machine-readable code, HTTP status and structured details.
    pub fn parts(&self) -> (&'static str, StatusCode, Value) {
        use StatusCode as S;
        match self {
            ApiError::UnknownSession(id) => ("unknown_session", S::NOT_FOUND, json!({ "id": id })),
            ApiError::UnknownModel(m) => ("unknown_model", S::BAD_REQUEST, json!({ "model": m })),
            ApiError::InvalidRequest(_) => ("invalid_request", S::BAD_REQUEST, json!({})),
            ApiError::NoSuchEndpoint => ("not_found", S::NOT_FOUND, json!({})),
            ApiError::Internal(_) => ("internal", S::INTERNAL_SERVER_ERROR, json!({})),
            ApiError::Filter(e) => match e {
                FilterError::Parse { item, reason } => {
                    ("filter_parse_error", S::BAD_REQUEST, json!({ "item": item, "reason": reason }))
                }
                FilterError::MissingResource { spec, resource } => (
                    "missing_resource",
                    S::BAD_REQUEST,
                    json!({ "spec": spec, "resource": resource.to_string() }),
                ),
                FilterError::UnknownTarget { spec, target, resource } => (
                    "unknown_target",
                    S::BAD_REQUEST,
                    json!({ "spec": spec, "target": target, "resource": resource.to_string() }),
                ),
                FilterError::InvalidCombination { spec, reason } => {
                    ("invalid_combination", S::BAD_REQUEST, json!({ "spec": spec, "reason": reason }))
                }
                FilterError::UnknownPreset(name) => ("unknown_preset", S::BAD_REQUEST, json!({ "preset": name })),
            },
            ApiError::Decode(e) => match e {
                DecodeError::DeadEnd(report) => (
                    "dead_end",
                    S::CONFLICT,
                    serde_json::to_value(report.as_ref()).unwrap_or_else(|_| json!({})),
                ),
                DecodeError::ZeroMass { position } => ("zero_mass", S::CONFLICT, json!({ "position": position })),
                DecodeError::TokenNotAllowed { token, rejected_by } => (
                    "token_not_allowed",
                    S::CONFLICT,
                    json!({ "token_id": token, "rejected_by": rejected_by }),
                ),
                DecodeError::UnknownToken(id) => ("unknown_token", S::BAD_REQUEST, json!({ "token_id": id })),
                DecodeError::UndoPastBeginning { requested, available } => (
                    "undo_past_beginning",
                    S::CONFLICT,
                    json!({ "requested": requested, "available": available }),
                ),
                DecodeError::InvalidCount | DecodeError::Strategy(_) => ("invalid_request", S::BAD_REQUEST, json!({})),
                DecodeError::Filter(f) => ApiError::Filter(f.clone()).parts(),
                DecodeError::Model(LmError::CatalogMismatch { expected, found }) => (
                    "model_error",
                    S::BAD_GATEWAY,
                    json!({ "expected_checksum": expected, "found_checksum": found }),
                ),
                DecodeError::Model(_) => ("model_error", S::BAD_GATEWAY, json!({})),
                DecodeError::VocabularyMismatch { .. } => ("internal", S::INTERNAL_SERVER_ERROR, json!({})),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (code, status, details) = self.parts();
        if status.is_server_error() {
            log::error!("{self}");
        }
        (status, Json(json!({ "code": code, "message": self.to_string(), "details": details }))).into_response()
    }
}
