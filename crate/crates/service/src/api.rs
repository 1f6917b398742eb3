use std::sync::atomic::Ordering;
use std::time::Instant;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Request, State};
use axum::http::{HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use lexlabel::annotator::predict_label_similarity;
use lexlabel::{add_described_label, Embedding, Error, LabelEntry};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::state::{AppState, Snapshot};

const VERSION_HEADER: &str = "x-taxonomy-version";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
    pub labels: Vec<String>,
    pub scores: Vec<f64>,
    pub taxonomy_version: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AddLabelRequest {
    pub id: String,
    #[serde(default)]
    pub name: Option<String>,
    pub description: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionResponse {
    pub taxonomy_version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelView {
    pub id: String,
    pub name: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyView {
    pub taxonomy_version: u64,
    pub labels: Vec<LabelView>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/predict", post(predict))
        .route("/v1/labels", post(add_label))
        .route("/v1/labels/{id}", delete(remove_label))
        .route("/v1/taxonomy", get(taxonomy))
        .route("/v1/healthz", get(healthz))
        .layer(middleware::from_fn_with_state(state.clone(), access_log))
        .with_state(state)
}

/// One structured line per request.
async fn access_log(State(state): State<AppState>, req: Request, next: Next) -> Response {
    let start = Instant::now();
    let method = req.method().clone();
    let path = req.uri().path().to_owned();
    state.0.counters.requests.fetch_add(1, Ordering::Relaxed);
    let response = next.run(req).await;
    let version = response
        .headers()
        .get(VERSION_HEADER)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("-")
        .to_owned();
    tracing::info!(
        target: "lexlabel::access",
        method = %method,
        path = %path,
        status = response.status().as_u16(),
        latency_us = start.elapsed().as_micros() as u64,
        taxonomy_version = %version,
        "request"
    );
    response
}

fn versioned(status: StatusCode, version: u64, body: impl Serialize) -> Response {
    let mut r = (status, Json(body)).into_response();
    r.headers_mut().insert(VERSION_HEADER, HeaderValue::from(version));
    r
}

fn json_body<T>(body: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    match body {
        Ok(Json(v)) => Ok(v),
        Err(JsonRejection::MissingJsonContentType(e)) => Err(ApiError {
            status: StatusCode::UNSUPPORTED_MEDIA_TYPE,
            kind: "UnsupportedMediaType",
            message: e.body_text(),
        }),
        Err(e) => Err(ApiError::bad_request("MalformedRequest", e.body_text())),
    }
}

fn to_f32(values: &[f64]) -> Vec<f32> {
    values.iter().map(|&v| v as f32).collect()
}

async fn embed_blocking(state: &AppState, text: String) -> Result<Embedding, ApiError> {
    let gateway = state
        .0
        .gateway
        .clone()
        .ok_or_else(|| Error::ServiceUnreachable("no embedding service is configured".into()))?;
    let mut out = tokio::task::spawn_blocking(move || gateway.embed_texts(&[text]))
        .await
        .map_err(|e| Error::ServiceUnreachable(format!("embedding task failed: {e}")))??;
    Ok(out.pop().expect("one text in, one vector out"))
}

async fn predict(
    State(state): State<AppState>,
    body: Result<Json<PredictRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = json_body(body)?;
    let k = req.k.unwrap_or(state.config().default_k);
    if k == 0 {
        return Err(Error::InvalidK(0).into());
    }
    let query = match (req.text, req.vector) {
        (Some(_), Some(_)) => {
            return Err(ApiError::bad_request(
                "MalformedRequest",
                "give either text or vector, not both",
            ))
        }
        (None, None) => return Err(ApiError::bad_request("MalformedRequest", "give text or vector")),
        (None, Some(v)) => Embedding::new(to_f32(&v))?,
        (Some(t), None) => embed_blocking(&state, t).await?,
    };
    // The snapshot is taken once; the whole prediction uses it.
    let snap: std::sync::Arc<Snapshot> = state.snapshot();
    let p = predict_label_similarity(req.doc_id.as_deref().unwrap_or(""), &query, &snap.index, k)?;
    state.0.counters.predictions.fetch_add(1, Ordering::Relaxed);
    let record = p.to_record();
    Ok(versioned(
        StatusCode::OK,
        snap.version(),
        PredictResponse {
            doc_id: req.doc_id,
            labels: record.labels,
            scores: record.scores,
            taxonomy_version: snap.version(),
        },
    ))
}

async fn add_label(
    State(state): State<AppState>,
    body: Result<Json<AddLabelRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = json_body(body)?;
    let name = req.name.clone().unwrap_or_else(|| req.id.clone());
    let entry = LabelEntry::new(&req.id, &name, &req.description)?;
    let gateway = state
        .0
        .gateway
        .clone()
        .ok_or_else(|| Error::ServiceUnreachable("no embedding service is configured".into()))?;

    let _writer = state.0.writer.lock().await;
    let current = state.snapshot();
    if current.taxonomy.contains(entry.id.as_str()) {
        return Err(Error::DuplicateLabel(entry.id.to_string()).into());
    }
    let Snapshot {
        mut taxonomy,
        mut index,
    } = (*current).clone();
    let (taxonomy, index, version) = tokio::task::spawn_blocking(move || {
        let version = add_described_label(&mut taxonomy, &mut index, entry, &gateway)?;
        Ok::<_, Error>((taxonomy, index, version))
    })
    .await
    .map_err(|e| Error::ServiceUnreachable(format!("embedding task failed: {e}")))??;
    let mut taxonomy = taxonomy;
    taxonomy.clear_embeddings();
    state.publish(Snapshot { taxonomy, index });
    Ok(versioned(
        StatusCode::CREATED,
        version,
        VersionResponse {
            taxonomy_version: version,
        },
    ))
}

async fn remove_label(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let _writer = state.0.writer.lock().await;
    let Snapshot {
        mut taxonomy,
        mut index,
    } = (*state.snapshot()).clone();
    taxonomy.remove(&id)?;
    let version = index.remove_label(&id)?;
    debug_assert_eq!(version, taxonomy.version());
    state.publish(Snapshot { taxonomy, index });
    Ok(versioned(
        StatusCode::OK,
        version,
        VersionResponse {
            taxonomy_version: version,
        },
    ))
}

async fn taxonomy(State(state): State<AppState>) -> Response {
    let snap = state.snapshot();
    versioned(
        StatusCode::OK,
        snap.version(),
        TaxonomyView {
            taxonomy_version: snap.version(),
            labels: snap
                .taxonomy
                .entries()
                .map(|e| LabelView {
                    id: e.id.to_string(),
                    name: e.name.clone(),
                    description: e.description.clone(),
                })
                .collect(),
        },
    )
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    labels: usize,
    dim: usize,
    taxonomy_version: u64,
    requests: u64,
    predictions: u64,
    mutations: u64,
    embedding_service: Option<String>,
}

async fn healthz(State(state): State<AppState>) -> Response {
    let snap = state.snapshot();
    let c = &state.0.counters;
    versioned(
        StatusCode::OK,
        snap.version(),
        Health {
            status: "ok",
            labels: snap.index.len(),
            dim: snap.index.dim(),
            taxonomy_version: snap.version(),
            requests: c.requests.load(Ordering::Relaxed),
            predictions: c.predictions.load(Ordering::Relaxed),
            mutations: c.mutations.load(Ordering::Relaxed),
            embedding_service: state.0.gateway.as_ref().map(|g| g.model_name().to_owned()),
        },
    )
}
