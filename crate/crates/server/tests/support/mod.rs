#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use activelabel::data::{gen_synthetic, load_dataset, write_dataset};
use activelabel::session::{Session, SessionState};
use activelabel_server::{router, Store};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use sha2::{Digest, Sha256};
use tower::ServiceExt;

pub struct Fixture {
    pub root: tempfile::TempDir,
    pub dataset: String,
}

impl Fixture {
    /// One 3-class, 120-sample mixture registered under `data/`.
    pub fn new() -> Self {
        let root = tempfile::tempdir().unwrap();
        let ds = gen_synthetic(3, 2, 40, 3.0, 11).unwrap();
        write_dataset(&ds, &root.path().join("data").join("mix")).unwrap();
        Fixture {
            root,
            dataset: ds.name().to_string(),
        }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.root.path().join("data")
    }

    pub fn state_dir(&self) -> PathBuf {
        self.root.path().join("state")
    }

    /// A fresh process view of the same directories.
    pub fn app(&self) -> Router {
        let store = Store::open(&self.data_dir(), &self.state_dir()).unwrap();
        router(Arc::new(store), None)
    }

    pub fn config(&self, budget: usize, rounds: usize) -> Value {
        serde_json::json!({
            "dataset": self.dataset,
            "budget": budget,
            "rounds": rounds,
            "seed": 5,
            "schedule": { "epochs": 30 },
        })
    }

    /// Pool ids of a persisted session, recovered the way a restart would.
    pub fn pool_ids(&self, session_id: &str) -> Vec<u64> {
        let text = std::fs::read_to_string(self.state_dir().join(format!("{session_id}.json"))).unwrap();
        let file: Value = serde_json::from_str(&text).unwrap();
        let state: SessionState = serde_json::from_value(file["state"].clone()).unwrap();
        let ds = load_dataset(&self.data_dir().join("mix").join("manifest.toml")).unwrap();
        Session::resume(state, &ds).unwrap().pool().ids().collect()
    }

    pub fn state_hash(&self, session_id: &str) -> String {
        file_hash(&self.state_dir().join(format!("{session_id}.json")))
    }
}

pub fn file_hash(path: &Path) -> String {
    let bytes = std::fs::read(path).unwrap();
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub async fn send(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = send_raw(app, method, uri, body.map(|v| v.to_string())).await;
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

pub async fn send_raw(app: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req.body(body.map(Body::from).unwrap_or_else(Body::empty)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

pub fn pending_ids(session: &Value) -> Vec<u64> {
    session["pending"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["sample_id"].as_u64().unwrap())
        .collect()
}

pub fn label(sample_id: u64, class_id: usize) -> Value {
    serde_json::json!([{ "sample_id": sample_id, "class_id": class_id }])
}

/// Drives a (n=12, r=3) session through 13 mutations: creation, then one
/// label per request, labeling each sample with `id % 3`. When
/// `restart_after = Some(k)`, the in-memory server is dropped after mutation
/// `k` and a new one is opened on the same directories. Returns the state
/// file hash after every mutation and the final session view.
pub async fn scripted_run(restart_after: Option<usize>) -> (Vec<String>, Value) {
    let fx = Fixture::new();
    let mut app = fx.app();
    let (status, mut view) = send(&app, "POST", "/sessions", Some(fx.config(12, 3))).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = view["session_id"].as_str().unwrap().to_string();
    let mut hashes = vec![fx.state_hash(&id)];
    for mutation in 1..13 {
        if restart_after == Some(hashes.len()) {
            drop(app);
            let before = fx.state_hash(&id);
            app = fx.app();
            assert_eq!(fx.state_hash(&id), before, "reopening must not rewrite state");
            let (_, reloaded) = send(&app, "GET", &format!("/sessions/{id}"), None).await;
            assert_eq!(
                reloaded, view,
                "restart after mutation {mutation} changed the session view"
            );
        }
        let next = pending_ids(&view)[0];
        let (status, body) = send(
            &app,
            "POST",
            &format!("/sessions/{id}/labels"),
            Some(label(next, (next % 3) as usize)),
        )
        .await;
        assert_eq!(status, StatusCode::OK, "{body}");
        view = body;
        hashes.push(fx.state_hash(&id));
    }
    (hashes, view)
}
