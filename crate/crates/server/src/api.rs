//! HTTP API.
//!
//! | method | path | body | response |
//! |---|---|---|---|
//! | POST | `/api/sessions` | none | 201 `{session_id}` |
//! | POST | `/api/sessions/{id}/messages` | `{message}` | 200 AgentTurn |
//! | GET | `/api/sessions/{id}` | | SessionRecord |
//! | GET | `/api/charts/{id}` | | ChartSpec |
//! | POST | `/api/ingest` | `{source: SourceSpec}` | PipelineSummary |
//! | GET | `/api/health` | | `{status, jobs}` |
//! | GET | `/api/stats` | | DatasetStats |
//!
//! Errors are `{"error": {"code", "message"}}`.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use marketlens_core::ingestion::SourceSpec;
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::app::{AppError, AppState};

impl AppError {
    pub fn status(&self) -> StatusCode {
        match self {
            AppError::NotFound(_) => StatusCode::NOT_FOUND,
            AppError::BadRequest(_) => StatusCode::BAD_REQUEST,
            AppError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            AppError::Busy => StatusCode::CONFLICT,
            AppError::Upstream(_) => StatusCode::BAD_GATEWAY,
            AppError::Config(_) | AppError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        if self.status().is_server_error() {
            tracing::error!(code = self.code(), error = %self, "request failed");
        }
        let body = json!({"error": {"code": self.code(), "message": self.to_string()}});
        (self.status(), Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, AppError>;

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> ApiResult<T> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| AppError::Internal(format!("worker failed: {e}")))?
}

fn parse_body(body: &[u8]) -> ApiResult<Value> {
    serde_json::from_slice(body).map_err(|e| AppError::BadRequest(format!("body is not JSON: {e}")))
}

async fn create_session(State(state): State<Arc<AppState>>) -> ApiResult<impl IntoResponse> {
    let record = blocking(move || state.create_session()).await?;
    Ok((StatusCode::CREATED, Json(json!({"session_id": record.session_id}))))
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || state.session(&id)).await?))
}

async fn post_message(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let body = parse_body(&body)?;
    let message = body.get("message").and_then(Value::as_str).unwrap_or("").to_string();
    let report = blocking(move || state.post_message(&id, &message)).await?;
    Ok(Json(report.turn))
}

async fn get_chart(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || state.chart(&id)).await?))
}

#[derive(Deserialize)]
struct IngestBody {
    source: SourceSpec,
}

async fn ingest(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let body: IngestBody = serde_json::from_value(parse_body(&body)?)
        .map_err(|e| AppError::BadRequest(format!("invalid source: {e}")))?;
    Ok(Json(blocking(move || state.run_ingest(&body.source)).await?))
}

async fn health(State(state): State<Arc<AppState>>) -> ApiResult<impl IntoResponse> {
    let jobs = blocking(move || Ok(state.store().job_count()?)).await?;
    Ok(Json(json!({"status": "ok", "jobs": jobs})))
}

async fn stats(State(state): State<Arc<AppState>>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || state.stats()).await?))
}

async fn fallback() -> AppError {
    AppError::NotFound("no such endpoint".into())
}

fn cors(origins: &[String]) -> CorsLayer {
    let layer = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    if origins.iter().any(|o| o == "*") {
        return layer.allow_origin(AllowOrigin::any());
    }
    let list: Vec<HeaderValue> = origins
        .iter()
        .filter_map(|o| match HeaderValue::from_str(o) {
            Ok(v) => Some(v),
            Err(_) => {
                tracing::warn!(origin = %o, "ignoring invalid CORS origin");
                None
            }
        })
        .collect();
    layer.allow_origin(AllowOrigin::list(list))
}

pub fn router(state: Arc<AppState>) -> Router {
    let cors = cors(state.cors_origins());
    Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/:id", get(get_session))
        .route("/api/sessions/:id/messages", post(post_message))
        .route("/api/charts/:id", get(get_chart))
        .route("/api/ingest", post(ingest))
        .route("/api/health", get(health))
        .route("/api/stats", get(stats))
        .fallback(fallback)
        .layer(cors)
        .with_state(state)
}

/// Serves until ctrl-c. Prints the bound address once listening.
pub async fn serve(state: Arc<AppState>, bind: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    let addr = listener.local_addr()?;
    println!("listening on http://{addr}");
    tracing::info!(%addr, "serving");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
