use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;

use crate::jobs::JobState;
use crate::service::{Fetch, Service, SubmitError};

/// Routes:
///
/// - `POST /documents`: submit a bundle, returns the job record.
/// - `GET /documents/{doc_id}/schema`: the schema, with an entity tag.
/// - `GET /documents/{doc_id}/status`: the latest job record.
/// - `GET /documents/{doc_id}/tables/{table_id}`: table grid with boxes.
pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/documents", post(submit))
        .route("/documents/{doc_id}/schema", get(schema))
        .route("/documents/{doc_id}/status", get(status))
        .route("/documents/{doc_id}/tables/{table_id}", get(table))
        .with_state(service)
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

async fn submit(State(service): State<Arc<Service>>, body: Bytes) -> Response {
    let result = tokio::task::spawn_blocking(move || service.submit(&body)).await;
    match result {
        Ok(Ok(job)) => {
            let code = if job.state == JobState::Done { StatusCode::OK } else { StatusCode::ACCEPTED };
            (code, Json(job)).into_response()
        }
        Ok(Err(SubmitError::Invalid(e))) => error(StatusCode::BAD_REQUEST, format!("invalid bundle: {e}")),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn schema(State(service): State<Arc<Service>>, Path(doc_id): Path<String>, headers: HeaderMap) -> Response {
    match service.fetch_schema(&doc_id) {
        Ok(Fetch::Ready { bytes, etag }) => {
            let tag = HeaderValue::from_str(&etag).expect("hex entity tag");
            let matches = headers
                .get(header::IF_NONE_MATCH)
                .and_then(|v| v.to_str().ok())
                .is_some_and(|v| v.split(',').any(|t| t.trim() == etag || t.trim() == "*"));
            if matches {
                return (StatusCode::NOT_MODIFIED, [(header::ETAG, tag)]).into_response();
            }
            (StatusCode::OK, [(header::ETAG, tag), (header::CONTENT_TYPE, HeaderValue::from_static("application/json"))], bytes).into_response()
        }
        Ok(Fetch::InProgress(job)) => (StatusCode::ACCEPTED, [(header::RETRY_AFTER, HeaderValue::from_static("1"))], Json(job)).into_response(),
        Ok(Fetch::Failed(job)) => (StatusCode::INTERNAL_SERVER_ERROR, Json(job)).into_response(),
        Ok(Fetch::NotFound) => error(StatusCode::NOT_FOUND, format!("unknown document {doc_id}")),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn status(State(service): State<Arc<Service>>, Path(doc_id): Path<String>) -> Response {
    match service.status(&doc_id) {
        Some(job) => Json(job).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("unknown document {doc_id}")),
    }
}

async fn table(State(service): State<Arc<Service>>, Path((doc_id, table_id)): Path<(String, String)>) -> Response {
    match service.table(&doc_id, &table_id) {
        Some(view) => Json(view).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("unknown table {table_id} in document {doc_id}")),
    }
}
