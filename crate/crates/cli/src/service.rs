//! HTTP API consumed by the annotation UI.

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use dialex_core::dataset::{
    items_from_candidates, Ack, AnnotationRecord, AnnotationStore, DatasetItem, Label,
};
use dialex_core::matcher::{CandidateRecord, UsageContext};
use dialex_core::Error;

#[derive(Debug, Clone, Serialize)]
pub struct TaskAssignment {
    pub pair_id: String,
    pub lemma: String,
    pub pos_max: String,
    pub term: String,
    pub distance: usize,
    pub contexts: Vec<UsageContext>,
    pub annotator_id: String,
    pub served_at: chrono::DateTime<Utc>,
}

struct Inner {
    store: AnnotationStore,
    skipped: HashMap<String, HashSet<String>>,
}

pub struct ServiceState {
    /// Items in serving order.
    items: Vec<DatasetItem>,
    by_id: HashMap<String, usize>,
    max_contexts: usize,
    inner: Mutex<Inner>,
}

pub type SharedState = Arc<ServiceState>;

impl ServiceState {
    /// Orders pairs by lemma frequency (descending), distance, then id.
    pub fn new(
        candidates: &[CandidateRecord],
        store: AnnotationStore,
        max_contexts: usize,
    ) -> Self {
        let mut items: Vec<(u64, DatasetItem)> = candidates
            .iter()
            .map(|c| c.lemma_freq)
            .zip(items_from_candidates(candidates))
            .collect();
        items.sort_by(|(fa, a), (fb, b)| {
            fb.cmp(fa)
                .then(a.distance.cmp(&b.distance))
                .then_with(|| a.pair_id.cmp(&b.pair_id))
        });
        let items: Vec<DatasetItem> = items.into_iter().map(|(_, i)| i).collect();
        let by_id = items
            .iter()
            .enumerate()
            .map(|(i, it)| (it.pair_id.clone(), i))
            .collect();
        ServiceState {
            items,
            by_id,
            max_contexts,
            inner: Mutex::new(Inner {
                store,
                skipped: HashMap::new(),
            }),
        }
    }

    pub fn pair_ids(candidates: &[CandidateRecord]) -> Vec<String> {
        items_from_candidates(candidates)
            .into_iter()
            .map(|i| i.pair_id)
            .collect()
    }

    fn assignment(&self, item: &DatasetItem, annotator: &str) -> TaskAssignment {
        TaskAssignment {
            pair_id: item.pair_id.clone(),
            lemma: item.lemma.clone(),
            pos_max: item.pos_max.to_string(),
            term: item.term.clone(),
            distance: item.distance,
            contexts: item
                .contexts
                .iter()
                .take(self.max_contexts)
                .cloned()
                .collect(),
            annotator_id: annotator.to_string(),
            served_at: Utc::now(),
        }
    }
}

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/api/tasks/next", get(next_task))
        .route("/api/tasks/{pair_id}/label", post(label_task))
        .route("/api/tasks/{pair_id}/skip", post(skip_task))
        .route("/api/progress", get(progress))
        .route("/api/agreement", get(agreement))
        .route("/api/pairs/{pair_id}", get(pair))
        .with_state(state)
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn annotator_field(body: &Value) -> Result<String, Response> {
    match body.get("annotator").and_then(Value::as_str) {
        Some(a) if !a.trim().is_empty() => Ok(a.to_string()),
        _ => Err(error(
            StatusCode::BAD_REQUEST,
            "`annotator` must be a non-empty string",
        )),
    }
}

fn json_body(bytes: &Bytes) -> Result<Value, Response> {
    match serde_json::from_slice::<Value>(bytes) {
        Ok(v @ Value::Object(_)) => Ok(v),
        Ok(_) => Err(error(StatusCode::BAD_REQUEST, "body must be a JSON object")),
        Err(e) => Err(error(
            StatusCode::BAD_REQUEST,
            format!("malformed JSON: {e}"),
        )),
    }
}

#[derive(Deserialize)]
struct NextQuery {
    annotator: Option<String>,
}

async fn next_task(State(state): State<SharedState>, Query(q): Query<NextQuery>) -> Response {
    let Some(annotator) = q.annotator.filter(|a| !a.trim().is_empty()) else {
        return error(
            StatusCode::BAD_REQUEST,
            "query parameter `annotator` is required",
        );
    };
    let inner = state.inner.lock().unwrap();
    let skipped = inner.skipped.get(&annotator);
    let next = state.items.iter().find(|it| {
        inner.store.label_of(&it.pair_id, &annotator).is_none()
            && !skipped.is_some_and(|s| s.contains(&it.pair_id))
    });
    match next {
        Some(item) => Json(state.assignment(item, &annotator)).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    }
}

async fn label_task(
    State(state): State<SharedState>,
    Path(pair_id): Path<String>,
    body: Bytes,
) -> Response {
    let body = match json_body(&body) {
        Ok(b) => b,
        Err(r) => return r,
    };
    let annotator = match annotator_field(&body) {
        Ok(a) => a,
        Err(r) => return r,
    };
    if !state.by_id.contains_key(&pair_id) {
        return error(StatusCode::NOT_FOUND, format!("unknown pair `{pair_id}`"));
    }
    let label: Label = match body.get("label").and_then(Value::as_str).map(str::parse) {
        Some(Ok(l)) => l,
        _ => {
            return error(
                StatusCode::UNPROCESSABLE_ENTITY,
                "`label` must be one of yes, inflected, no",
            )
        }
    };
    let rec = AnnotationRecord {
        pair_id: pair_id.clone(),
        annotator_id: annotator.clone(),
        label,
        ts: Utc::now(),
    };
    let mut inner = state.inner.lock().unwrap();
    match inner.store.record_annotation(rec) {
        Ok(ack) => {
            if let Some(s) = inner.skipped.get_mut(&annotator) {
                s.remove(&pair_id);
            }
            let status = match ack {
                Ack::Created => "created",
                Ack::Replaced => "replaced",
            };
            Json(json!({
                "pair_id": pair_id,
                "annotator": annotator,
                "label": label.as_str(),
                "status": status,
            }))
            .into_response()
        }
        Err(Error::NotFound(id)) => error(StatusCode::NOT_FOUND, format!("unknown pair `{id}`")),
        Err(Error::Validation(m)) => error(StatusCode::UNPROCESSABLE_ENTITY, m),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn skip_task(
    State(state): State<SharedState>,
    Path(pair_id): Path<String>,
    body: Bytes,
) -> Response {
    let body = match json_body(&body) {
        Ok(b) => b,
        Err(r) => return r,
    };
    let annotator = match annotator_field(&body) {
        Ok(a) => a,
        Err(r) => return r,
    };
    if !state.by_id.contains_key(&pair_id) {
        return error(StatusCode::NOT_FOUND, format!("unknown pair `{pair_id}`"));
    }
    let mut inner = state.inner.lock().unwrap();
    inner
        .skipped
        .entry(annotator.clone())
        .or_default()
        .insert(pair_id.clone());
    Json(json!({ "pair_id": pair_id, "annotator": annotator, "status": "skipped" })).into_response()
}

async fn progress(State(state): State<SharedState>) -> Response {
    let inner = state.inner.lock().unwrap();
    Json(inner.store.progress()).into_response()
}

async fn agreement(State(state): State<SharedState>) -> Response {
    let inner = state.inner.lock().unwrap();
    match inner.store.agreement() {
        Some(a) => Json(a).into_response(),
        None => Json(json!({ "items": 0, "raters": 0, "kappa": null })).into_response(),
    }
}

async fn pair(State(state): State<SharedState>, Path(pair_id): Path<String>) -> Response {
    let Some(&idx) = state.by_id.get(&pair_id) else {
        return error(StatusCode::NOT_FOUND, format!("unknown pair `{pair_id}`"));
    };
    let item = &state.items[idx];
    let inner = state.inner.lock().unwrap();
    let labels: Vec<Value> = inner
        .store
        .records()
        .filter(|r| r.pair_id == pair_id)
        .map(|r| json!({ "annotator": r.annotator_id, "label": r.label.as_str(), "ts": r.ts }))
        .collect();
    Json(json!({
        "pair_id": item.pair_id,
        "lemma": item.lemma,
        "pos_max": item.pos_max.to_string(),
        "term": item.term,
        "distance": item.distance,
        "contexts": item.contexts.iter().take(state.max_contexts).collect::<Vec<_>>(),
        "annotations": labels,
    }))
    .into_response()
}
