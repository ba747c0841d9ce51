use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use settle_core::io::ParseError;
use settle_core::Error;

/// Error body shared by every endpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBody {
    /// Stable machine-readable category.
    pub error: &'static str,
    pub message: String,
    /// Name of the violated model invariant, when there is one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariant: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub units_side: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reimbursement_side: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                error,
                message: message.into(),
                invariant: None,
                units_side: None,
                reimbursement_side: None,
            },
        }
    }

    pub fn not_found(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", what)
    }

    pub fn bad_json(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "malformed_json", message)
    }

    /// A request-level invariant (not a model one) was violated.
    pub fn request(invariant: &'static str, message: impl Into<String>) -> Self {
        let mut e = Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", message);
        e.body.invariant = Some(invariant);
        e
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "revision_conflict", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        match e {
            Error::RegimeTie {
                units_side,
                reimbursement_side,
            } => {
                let mut api = Self::new(StatusCode::CONFLICT, "regime_tie", e.to_string());
                api.body.units_side = Some(units_side);
                api.body.reimbursement_side = Some(reimbursement_side);
                api
            }
            Error::Lp(_) => Self::internal(e.to_string()),
            _ => {
                let mut api = Self::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "invalid_document",
                    e.to_string(),
                );
                api.body.invariant = e.invariant_name();
                api
            }
        }
    }
}

impl From<ParseError> for ApiError {
    fn from(e: ParseError) -> Self {
        match e {
            ParseError::Invalid(inner) => inner.into(),
            // JSON values carry no useful position; the serde message names the field
            ParseError::Syntax { message, .. } => Self::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_document",
                message,
            ),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}
