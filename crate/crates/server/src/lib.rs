//! HTTP backend for the annotation UI.
//!
//! Every `<id>.json` file in the served directory is a project. Writes are
//! whole-document replacements guarded by an `expected-revision` header; the
//! current revision is returned in the `revision` header of every read.

mod error;
mod state;

use std::future::Future;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use trajex_core::annot::{annotations_to_json, ingest_frames, parse_annotations, save_project, ProjectDocument};
use trajex_core::trace::{frame_rectify_spec, trace_project, TraceError, TraceOptions};
use trajex_core::warp::rectify_encoded;

pub use error::ApiError;
pub use state::AppState;
use state::{blocking, frame_dir, geometry_hash, load_blocking, valid_id, PreviewKey};

pub const REVISION_HEADER: &str = "revision";
pub const EXPECTED_REVISION_HEADER: &str = "expected-revision";

type Shared = Arc<AppState>;

/// Router with CORS open to every origin.
pub fn router(project_dir: impl Into<PathBuf>) -> Router {
    router_with_cors(project_dir, None)
}

/// Router whose CORS policy admits only `origin` when given.
pub fn router_with_cors(project_dir: impl Into<PathBuf>, origin: Option<HeaderValue>) -> Router {
    let cors = match origin {
        None => CorsLayer::permissive(),
        Some(o) => CorsLayer::new()
            .allow_origin(AllowOrigin::exact(o))
            .allow_methods(Any)
            .allow_headers(Any)
            .expose_headers(Any),
    };
    Router::new()
        .route("/healthz", get(healthz))
        .route("/projects", get(list_projects))
        .route("/projects/{id}", get(get_project).put(put_project))
        .route("/projects/{id}/annotations", get(get_annotations).put(put_annotations))
        .route("/projects/{id}/frames/{n}/image", get(frame_image))
        .route("/projects/{id}/trace", post(trace))
        .layer(cors)
        .with_state(Arc::new(AppState::new(project_dir)))
}

/// Serves until `shutdown` resolves, then lets in-flight requests finish.
pub async fn serve(
    listener: tokio::net::TcpListener,
    app: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}

async fn healthz() -> &'static str {
    "ok"
}

fn json_bytes(bytes: Vec<u8>, revision: u64) -> Response {
    (
        [(header::CONTENT_TYPE, HeaderValue::from_static("application/json")), (header::HeaderName::from_static(REVISION_HEADER), revision.into())],
        bytes,
    )
        .into_response()
}

fn expected_revision(headers: &HeaderMap) -> Result<u64, ApiError> {
    let value = headers.get(EXPECTED_REVISION_HEADER).ok_or_else(|| {
        ApiError::new(StatusCode::PRECONDITION_REQUIRED, format!("missing `{EXPECTED_REVISION_HEADER}` header"))
    })?;
    value
        .to_str()
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, format!("`{EXPECTED_REVISION_HEADER}` must be an integer")))
}

fn revision_mismatch(current: u64, expected: u64) -> ApiError {
    ApiError::new(StatusCode::CONFLICT, "revision mismatch").with("revision", current).with("expected", expected)
}

async fn list_projects(State(app): State<Shared>) -> Result<Json<Vec<Value>>, ApiError> {
    let dir = app.dir().to_path_buf();
    let mut ids: Vec<String> = blocking(move || {
        std::fs::read_dir(&dir)
            .map(|rd| {
                rd.filter_map(|e| e.ok())
                    .filter(|e| e.path().is_file())
                    .filter_map(|e| e.file_name().to_str()?.strip_suffix(".json").map(String::from))
                    .filter(|id| valid_id(id))
                    .collect()
            })
            .unwrap_or_default()
    })
    .await?;
    ids.sort();

    let mut out = Vec::with_capacity(ids.len());
    for id in ids {
        if let Some(slot) = app.cached(&id) {
            let s = slot.state.read().await;
            out.push(json!({"id": id, "mode": s.doc.project.mode, "frame_count": s.sequence.len(), "status": "ok"}));
            continue;
        }
        let path = app.path_of(&id);
        out.push(match blocking(move || load_blocking(&path)).await? {
            Ok((doc, seq)) => json!({"id": id, "mode": doc.project.mode, "frame_count": seq.len(), "status": "ok"}),
            Err(e) => json!({"id": id, "mode": null, "frame_count": null, "status": "error", "error": e.to_string()}),
        });
    }
    Ok(Json(out))
}

async fn get_project(State(app): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let slot = app.project(&id).await?;
    let s = slot.state.read().await;
    Ok(json_bytes(s.doc.to_json()?, s.revision))
}

async fn put_project(
    State(app): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let expected = expected_revision(&headers)?;
    let slot = app.project(&id).await?;
    let doc = ProjectDocument::from_json(&body, "request body")?;

    let mut s = slot.state.write().await;
    if s.revision != expected {
        return Err(revision_mismatch(s.revision, expected));
    }
    let path = slot.path.clone();
    let (sequence, saved) = blocking(move || {
        let seq = ingest_frames(&frame_dir(&path, &doc)).map_err(|e| {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "frames unavailable").with("message", e.to_string())
        })?;
        save_project(&doc, &path)?;
        Ok::<_, ApiError>((seq, doc))
    })
    .await??;
    s.doc = saved;
    s.sequence = sequence;
    s.revision += 1;
    tracing::info!(project = %id, revision = s.revision, "project replaced");
    Ok((
        [(header::HeaderName::from_static(REVISION_HEADER), HeaderValue::from(s.revision))],
        Json(json!({"revision": s.revision})),
    )
        .into_response())
}

async fn get_annotations(State(app): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let slot = app.project(&id).await?;
    let s = slot.state.read().await;
    Ok(json_bytes(annotations_to_json(&s.doc.annotations), s.revision))
}

async fn put_annotations(
    State(app): State<Shared>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let expected = expected_revision(&headers)?;
    let slot = app.project(&id).await?;
    let annotations = parse_annotations(&body)?;

    let mut s = slot.state.write().await;
    if s.revision != expected {
        return Err(revision_mismatch(s.revision, expected));
    }
    let mut doc = s.doc.clone();
    doc.annotations = annotations;
    let path = slot.path.clone();
    let doc = blocking(move || save_project(&doc, &path).map(|()| doc)).await??;
    s.doc = doc;
    s.revision += 1;
    tracing::info!(project = %id, revision = s.revision, "annotations saved");
    Ok((
        [(header::HeaderName::from_static(REVISION_HEADER), HeaderValue::from(s.revision))],
        Json(json!({"revision": s.revision})),
    )
        .into_response())
}

#[derive(Debug, Deserialize)]
struct ImageQuery {
    #[serde(default)]
    rectified: bool,
}

fn content_type_for(path: &std::path::Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref() {
        Some("jpg" | "jpeg") => "image/jpeg",
        _ => "image/png",
    }
}

async fn frame_image(
    State(app): State<Shared>,
    Path((id, n)): Path<(String, String)>,
    Query(q): Query<ImageQuery>,
) -> Result<Response, ApiError> {
    let slot = app.project(&id).await?;
    let (file, spec, key) = {
        let s = slot.state.read().await;
        let frame = n
            .parse::<u32>()
            .ok()
            .and_then(|i| s.sequence.frame(i).cloned())
            .ok_or_else(|| ApiError::not_found(format!("no frame `{n}` in project `{id}`")))?;
        if !q.rectified {
            (frame, None, None)
        } else {
            let spec = frame_rectify_spec(&s.doc.project, &s.sequence, frame.index)
                .map_err(|e| ApiError::new(StatusCode::CONFLICT, "rectification unavailable").with("message", e.to_string()))?;
            let key = PreviewKey {
                project: id.clone(),
                revision: s.revision,
                frame: frame.index,
                geometry: geometry_hash(spec.h.matrix().iter().flatten().copied(), (spec.out_width, spec.out_height)),
            };
            (frame, Some(spec), Some(key))
        }
    };

    let png = |bytes: Bytes| ([(header::CONTENT_TYPE, "image/png")], bytes).into_response();
    let (Some(spec), Some(key)) = (spec, key) else {
        let bytes = tokio::fs::read(&file.path).await.map_err(ApiError::internal)?;
        return Ok(([(header::CONTENT_TYPE, content_type_for(&file.path))], bytes).into_response());
    };
    if let Some(bytes) = app.preview(&key) {
        return Ok(png(bytes));
    }
    let path = file.path.clone();
    let bytes = blocking(move || {
        let source = std::fs::read(&path).map_err(ApiError::internal)?;
        rectify_encoded(&source, &spec).map_err(ApiError::internal)
    })
    .await??;
    let bytes = Bytes::from(bytes);
    app.store_preview(key, bytes.clone());
    Ok(png(bytes))
}

async fn trace(State(app): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let slot = app.project(&id).await?;
    let (doc, sequence, revision) = {
        let s = slot.state.read().await;
        (s.doc.clone(), s.sequence.clone(), s.revision)
    };
    match blocking(move || trace_project(&doc, &sequence, &TraceOptions::default())).await? {
        Ok(out) => Ok(json_bytes(out.to_json(), revision)),
        Err(TraceError::Validation(report)) => Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation failed")
            .with("findings", serde_json::to_value(&report.findings).map_err(ApiError::internal)?)),
        Err(e) => Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "trace failed").with("message", e.to_string())),
    }
}
