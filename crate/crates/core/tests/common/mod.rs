#![allow(dead_code)]

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use dialex_core::corpus::{
    ingest_dialect_corpus, read_tagged_corpus, DialectFormat, SentenceRecord, TaggedCorpus,
};
use dialex_core::dataset::{read_dataset_tsv, DatasetItem};

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixture(name: &str) -> PathBuf {
    workspace_root().join("fixtures").join(name)
}

pub fn prompts_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("prompts")
}

pub fn load_standard() -> TaggedCorpus {
    let f = File::open(fixture("standard.tsv")).unwrap();
    read_tagged_corpus(BufReader::new(f), "standard").unwrap()
}

pub fn load_dialect() -> Vec<SentenceRecord> {
    let f = File::open(fixture("dialect.txt")).unwrap();
    ingest_dialect_corpus(BufReader::new(f), DialectFormat::PlainLines, "dialect")
        .collect::<Result<_, _>>()
        .unwrap()
}

pub fn load_items(name: &str) -> Vec<DatasetItem> {
    read_dataset_tsv(File::open(fixture(name)).unwrap()).unwrap()
}

/// Full (m+1)×(n+1) edit-distance matrix over chars.
pub fn dp_oracle(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

/// Fleiss' kappa written out term by term from the textbook definition.
pub fn kappa_oracle(counts: &[Vec<usize>]) -> f64 {
    let n_items = counts.len() as f64;
    let raters: usize = counts[0].iter().sum();
    let n = raters as f64;
    let k = counts[0].len();
    let mut p_j = vec![0.0; k];
    let mut p_bar = 0.0;
    for row in counts {
        let mut agree = 0.0;
        for (j, &c) in row.iter().enumerate() {
            p_j[j] += c as f64;
            agree += (c * c) as f64;
        }
        p_bar += (agree - n) / (n * (n - 1.0));
    }
    p_bar /= n_items;
    let p_e: f64 = p_j.iter().map(|s| (s / (n_items * n)).powi(2)).sum();
    (p_bar - p_e) / (1.0 - p_e)
}

#[derive(Debug, Clone)]
pub enum Reply {
    Text(String),
    Status(u16),
    Hang,
    Malformed,
}

type Script = dyn Fn(&str, usize) -> Reply + Send + Sync;

#[derive(Clone)]
struct MockState {
    script: Arc<Script>,
    calls: Arc<AtomicUsize>,
    prompts: Arc<std::sync::Mutex<Vec<Value>>>,
}

/// An OpenAI-compatible chat-completions server driven by a script that
/// maps (prompt, request number) to a reply.
pub struct MockServer {
    pub base_url: String,
    calls: Arc<AtomicUsize>,
    bodies: Arc<std::sync::Mutex<Vec<Value>>>,
    handle: tokio::task::JoinHandle<()>,
}

impl MockServer {
    pub async fn start<F>(script: F) -> Self
    where
        F: Fn(&str, usize) -> Reply + Send + Sync + 'static,
    {
        let calls = Arc::new(AtomicUsize::new(0));
        let bodies = Arc::new(std::sync::Mutex::new(Vec::new()));
        let state = MockState {
            script: Arc::new(script),
            calls: calls.clone(),
            prompts: bodies.clone(),
        };
        let app = Router::new()
            .route("/v1/chat/completions", post(handle))
            .with_state(state);
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = tokio::spawn(async move {
            axum::serve(listener, app).await.unwrap();
        });
        MockServer {
            base_url: format!("http://{addr}"),
            calls,
            bodies,
            handle,
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn bodies(&self) -> Vec<Value> {
        self.bodies.lock().unwrap().clone()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.handle.abort();
    }
}

async fn handle(State(state): State<MockState>, Json(body): Json<Value>) -> Response {
    let n = state.calls.fetch_add(1, Ordering::SeqCst);
    let prompt = body["messages"][0]["content"]
        .as_str()
        .unwrap_or_default()
        .to_string();
    state.prompts.lock().unwrap().push(body);
    match (state.script)(&prompt, n) {
        Reply::Text(t) => Json(json!({
            "id": format!("mock-{n}"),
            "object": "chat.completion",
            "choices": [{"index": 0, "message": {"role": "assistant", "content": t}, "finish_reason": "stop"}],
        }))
        .into_response(),
        Reply::Status(code) => StatusCode::from_u16(code).unwrap().into_response(),
        Reply::Hang => {
            tokio::time::sleep(Duration::from_secs(3600)).await;
            StatusCode::GATEWAY_TIMEOUT.into_response()
        }
        Reply::Malformed => Json(json!({"unexpected": true})).into_response(),
    }
}
