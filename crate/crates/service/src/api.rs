//! Routes and handlers.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use heliomap::analysis::{validation_table, ValidationTag};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use crate::session::{OverlayLayer, PixelLabel, ServiceError, Session};

pub const VERSION_HEADER: &str = "x-classifier-version";

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::NotFound(m) => ApiError(StatusCode::NOT_FOUND, m),
            ServiceError::Invalid(m) => ApiError(StatusCode::UNPROCESSABLE_ENTITY, m),
            ServiceError::Conflict(m) => ApiError(StatusCode::CONFLICT, m),
            ServiceError::Internal(e) => {
                log::error!("{e}");
                ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
            }
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Malformed JSON is a 400; well-formed JSON of the wrong shape is a 422.
fn parse_body<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| {
        let status = match e.classify() {
            serde_json::error::Category::Data => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError(status, format!("request body: {e}"))
    })
}

/// Runs blocking session work off the async workers.
async fn blocking<T: Send + 'static>(
    session: &Arc<Session>,
    f: impl FnOnce(&Session) -> Result<T, ServiceError> + Send + 'static,
) -> ApiResult<T> {
    let s = session.clone();
    tokio::task::spawn_blocking(move || f(&s))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, format!("worker failed: {e}")))?
        .map_err(ApiError::from)
}

fn png(bytes: Vec<u8>, version: Option<u64>) -> Response {
    let mut resp = (
        [(header::CONTENT_TYPE, HeaderValue::from_static("image/png")), (header::CACHE_CONTROL, HeaderValue::from_static("no-store"))],
        bytes,
    )
        .into_response();
    if let Some(v) = version {
        resp.headers_mut().insert(VERSION_HEADER, HeaderValue::from(v));
    }
    resp
}

pub fn router(session: Arc<Session>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/session", get(session_info))
        .route("/api/patches", get(list_patches))
        .route("/api/patches/{id}/rgb.png", get(rgb))
        .route("/api/patches/{id}/overlay.png", get(overlay))
        .route("/api/patches/{id}/feedback", post(feedback))
        .route("/api/retrain", post(retrain))
        .route("/api/export", post(export))
        .route("/api/validation/queue", get(queue))
        .route("/api/validation/tags", post(tag))
        .route("/api/validation/tally", get(tally))
        .with_state(session)
}

async fn health(State(s): State<Arc<Session>>) -> Response {
    Json(json!({
        "status": "ok",
        "version": env!("CARGO_PKG_VERSION"),
        "workspace_digest": s.workspace().digest,
        "classifier_version": s.snapshot().version,
    }))
    .into_response()
}

async fn session_info(State(s): State<Arc<Session>>) -> Response {
    let snap = s.snapshot();
    let clf = &snap.classifier;
    Json(json!({
        "classifier_version": snap.version,
        "k": clf.k,
        "classes": clf.class_names,
        "solar_class_id": clf.solar_class_id,
        "feedback_count": snap.feedback_count,
        "patches": s.workspace().patches.len(),
        "predictions": s.workspace().predictions.len(),
        "config": s.config(),
    }))
    .into_response()
}

async fn list_patches(State(s): State<Arc<Session>>) -> Response {
    let snap = s.snapshot();
    let items: Vec<_> = s
        .workspace()
        .patches
        .iter()
        .map(|(id, e)| {
            let t = e.patch.transform();
            json!({
                "patch_id": id,
                "width": e.patch.width(),
                "height": e.patch.height(),
                "crs": t.crs_code,
                "bounds": t.bounds(e.patch.width(), e.patch.height()),
                "has_feedback": snap.feedback_patches.contains(id),
            })
        })
        .collect();
    Json(items).into_response()
}

#[derive(Deserialize)]
struct RgbQuery {
    /// Comma-separated zero-based band indices, red first.
    bands: Option<String>,
    low: Option<f64>,
    high: Option<f64>,
}

fn parse_bands(s: &str) -> ApiResult<[usize; 3]> {
    let parsed: Result<Vec<usize>, _> = s.split(',').map(|b| b.trim().parse()).collect();
    match parsed.as_deref() {
        Ok(&[r, g, b]) => Ok([r, g, b]),
        _ => Err(ApiError(StatusCode::UNPROCESSABLE_ENTITY, format!("bands must be three indices, got {s:?}"))),
    }
}

async fn rgb(State(s): State<Arc<Session>>, Path(id): Path<String>, Query(q): Query<RgbQuery>) -> ApiResult<Response> {
    let bands = q.bands.as_deref().map(parse_bands).transpose()?;
    let (low, high) = (q.low.unwrap_or(2.0), q.high.unwrap_or(98.0));
    let bytes = blocking(&s, move |s| s.rgb_png(&id, bands, low, high)).await?;
    Ok(png(bytes, None))
}

#[derive(Deserialize)]
struct OverlayQuery {
    layer: Option<String>,
}

async fn overlay(State(s): State<Arc<Session>>, Path(id): Path<String>, Query(q): Query<OverlayQuery>) -> ApiResult<Response> {
    let layer = match q.layer.as_deref() {
        None | Some("classes") => OverlayLayer::Classes,
        Some("clusters") => OverlayLayer::Clusters,
        Some(other) => {
            return Err(ApiError(StatusCode::UNPROCESSABLE_ENTITY, format!("layer must be clusters or classes, got {other:?}")))
        }
    };
    let (version, bytes) = blocking(&s, move |s| s.overlay_png(&id, layer)).await?;
    Ok(png(bytes, Some(version)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FeedbackBody {
    pixels: Vec<PixelLabel>,
    #[serde(default)]
    expected_version: Option<u64>,
}

async fn feedback(State(s): State<Arc<Session>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    if !s.workspace().patches.contains_key(&id) {
        return Err(ApiError(StatusCode::NOT_FOUND, format!("unknown patch {id:?}")));
    }
    if body.iter().all(u8::is_ascii_whitespace) {
        return Err(ApiError(StatusCode::UNPROCESSABLE_ENTITY, "empty feedback body".into()));
    }
    let b: FeedbackBody = parse_body(&body)?;
    let out = blocking(&s, move |s| s.feedback(&id, &b.pixels, b.expected_version)).await?;
    Ok(Json(out).into_response())
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RetrainBody {
    steps: Option<usize>,
}

async fn retrain(State(s): State<Arc<Session>>, body: Bytes) -> ApiResult<Response> {
    let b: RetrainBody = if body.iter().all(u8::is_ascii_whitespace) { RetrainBody::default() } else { parse_body(&body)? };
    let out = blocking(&s, move |s| s.retrain(b.steps)).await?;
    Ok(Json(out).into_response())
}

async fn export(State(s): State<Arc<Session>>) -> ApiResult<Response> {
    let manifest = blocking(&s, |s| s.export()).await?;
    Ok(Json(manifest).into_response())
}

async fn queue(State(s): State<Arc<Session>>) -> Response {
    let items = s.queue();
    let pending = items.iter().filter(|i| i.tag.is_none()).count();
    Json(json!({ "items": items, "pending": pending, "tally": s.tally() })).into_response()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TagBody {
    prediction_id: String,
    tag: ValidationTag,
    #[serde(default)]
    annotator: Option<String>,
}

async fn tag(State(s): State<Arc<Session>>, body: Bytes) -> ApiResult<Response> {
    let b: TagBody = parse_body(&body)?;
    let tally = blocking(&s, move |s| s.tag(&b.prediction_id, b.tag, b.annotator)).await?;
    Ok(Json(tally).into_response())
}

async fn tally(State(s): State<Arc<Session>>) -> Response {
    let t = s.tally();
    Json(json!({ "tally": t, "table": validation_table(&t) })).into_response()
}
