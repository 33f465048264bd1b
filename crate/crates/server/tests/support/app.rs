//! In-process application fixtures and a request helper.

use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use marketlens::config::AgentSettings;
use marketlens::{AppState, Providers, SessionStore};
use marketlens_core::domain::SkillEntry;
use marketlens_core::enrichment::SkillLibrary;
use marketlens_core::fixtures::{
    extraction_script_path, library_embedder, load_document_script, seed_table3, skills_path, table3_skill_entries,
};
use marketlens_core::par::Execution;
use marketlens_core::provider::{ChatProvider, FixedChat, ScriptedChat};
use marketlens_core::store::Store;
use serde_json::Value;
use tower::ServiceExt;

pub fn bundled_skills() -> Vec<SkillEntry> {
    SkillLibrary::parse_entries(&std::fs::read_to_string(skills_path()).unwrap()).unwrap()
}

/// App over `store` with a bag-of-tokens embedder built from `entries`.
pub fn state_with(
    store: Store,
    sessions: SessionStore,
    agent: Arc<dyn ChatProvider>,
    extraction: Arc<dyn ChatProvider>,
    entries: Vec<SkillEntry>,
    with_library: bool,
) -> AppState {
    let embedder = Arc::new(library_embedder(&entries));
    let library = with_library.then(|| SkillLibrary::build(entries, embedder.as_ref(), Execution::default()).unwrap());
    let providers = Providers {
        agent,
        advisor: Arc::new(FixedChat::new("Focus on the skills listed above.")),
        extraction,
        embedder,
    };
    AppState::new(Arc::new(store), sessions, providers, library, AgentSettings::default())
        .unwrap()
        .with_cors_origins(vec!["http://localhost:5173".into()])
}

/// Table-III store, scripted agent, in-memory sessions.
pub fn table3_state(agent_script: Vec<String>) -> AppState {
    let store = Store::open_in_memory().unwrap();
    seed_table3(&store).unwrap();
    state_with(
        store,
        SessionStore::open_in_memory().unwrap(),
        Arc::new(ScriptedChat::new(agent_script)),
        Arc::new(FixedChat::new("unused")),
        table3_skill_entries(),
        false,
    )
}

/// Empty store with the bundled skill library and extraction script.
pub fn corpus_state(strict: bool) -> AppState {
    state_with(
        Store::open_in_memory().unwrap(),
        SessionStore::open_in_memory().unwrap(),
        Arc::new(ScriptedChat::new(Vec::<String>::new())),
        Arc::new(load_document_script(&extraction_script_path(strict)).unwrap()),
        bundled_skills(),
        true,
    )
}

pub async fn call_raw(app: &Router, method: &str, path: &str, body: Option<&str>) -> (StatusCode, Bytes) {
    let mut req = Request::builder().method(method).uri(path);
    if body.is_some() {
        req = req.header(header::CONTENT_TYPE, "application/json");
    }
    let req = req.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes())
}

pub async fn call(app: &Router, method: &str, path: &str, body: Option<Value>) -> (StatusCode, Value) {
    let body = body.map(|b| b.to_string());
    let (status, bytes) = call_raw(app, method, path, body.as_deref()).await;
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}
