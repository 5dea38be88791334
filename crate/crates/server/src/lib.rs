//! HTTP session service for the chat UI.
//!
//! | Method | Path                      | Purpose                         |
//! |--------|---------------------------|---------------------------------|
//! | POST   | `/sessions`               | create an idle session          |
//! | POST   | `/sessions/{id}/query`    | submit a question               |
//! | POST   | `/sessions/{id}/clarify`  | answer a clarification prompt   |
//! | GET    | `/sessions/{id}/history`  | ordered session history         |
//! | GET    | `/health`                 | build info and table row counts |
//!
//! Requests on one session are serialized: a second request arriving while
//! the first is still running gets `409 Conflict`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::{json, Value};
use soccerrag_core::agent::StepFeedback;
use soccerrag_core::session::{Engine, HistoryEntry, Session, SessionError, StepResult};
use soccerrag_core::validator::UserChoice;
use tower_http::services::ServeDir;

type SessionSlot = Arc<tokio::sync::Mutex<Session>>;

#[derive(Clone)]
pub struct AppState {
    engine: Arc<Engine>,
    sessions: Arc<Mutex<HashMap<String, SessionSlot>>>,
}

impl AppState {
    pub fn new(engine: Engine) -> Self {
        Self {
            engine: Arc::new(engine),
            sessions: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    fn slot(&self, id: &str) -> Option<SessionSlot> {
        self.sessions.lock().expect("session map").get(id).cloned()
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match e {
            SessionError::OutOfTurn(_) => StatusCode::CONFLICT,
            SessionError::InvalidChoice(_) | SessionError::CustomNotAllowed => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, e.to_string())
    }
}

fn parse_object(body: &Bytes) -> Result<serde_json::Map<String, Value>, ApiError> {
    match serde_json::from_slice::<Value>(body) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(ApiError::new(StatusCode::BAD_REQUEST, "body must be a JSON object")),
        Err(e) => Err(ApiError::new(StatusCode::BAD_REQUEST, format!("malformed JSON: {e}"))),
    }
}

#[derive(Serialize)]
struct Step<'a> {
    stage: String,
    message: &'a str,
}

fn steps_json(steps: &[&StepFeedback]) -> Vec<Value> {
    steps
        .iter()
        .map(|s| json!(Step { stage: s.stage.to_string(), message: &s.message }))
        .collect()
}

/// Renders a step result together with the feedback produced while
/// computing it.
pub fn render_step(result: &StepResult, new_history: &[HistoryEntry]) -> Value {
    let steps: Vec<&StepFeedback> = new_history
        .iter()
        .filter_map(|h| match h {
            HistoryEntry::Step(s) => Some(s),
            _ => None,
        })
        .collect();
    match result {
        StepResult::FinalAnswer(bundle) => json!({
            "type": "answer",
            "markdown": bundle.rendered_answer,
            "sql": bundle.sql,
            "table": bundle.result_table,
            "steps": steps_json(&steps),
        }),
        StepResult::NeedsClarification(c) => json!({
            "type": "clarification",
            "kind": c.kind,
            "raw_value": c.raw_value,
            "options": c.candidates.iter().enumerate().map(|(i, cand)| json!({
                "index": i,
                "canonical": cand.canonical_name,
                "primary_key": cand.primary_key,
            })).collect::<Vec<_>>(),
            "allow_pass_through": c.allows_pass_through,
            "allow_custom": c.allows_custom,
            "steps": steps_json(&steps),
        }),
        StepResult::Failure { error, user_message } => json!({
            "type": "failure",
            "message": user_message,
            "error": error,
            "steps": steps_json(&steps),
        }),
    }
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    if !body.iter().all(u8::is_ascii_whitespace) {
        parse_object(&body)?;
    }
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = Session::new(id.clone(), false);
    state
        .sessions
        .lock()
        .expect("session map")
        .insert(id.clone(), Arc::new(tokio::sync::Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id }))))
}

enum Action {
    Submit(String),
    Clarify(UserChoice),
}

async fn run_action(state: AppState, id: String, action: Action) -> Result<Json<Value>, ApiError> {
    let slot = state
        .slot(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id}")))?;
    let mut session = slot
        .try_lock_owned()
        .map_err(|_| ApiError::new(StatusCode::CONFLICT, "a request for this session is already running"))?;
    let engine = state.engine.clone();
    let outcome = tokio::task::spawn_blocking(move || {
        let before = session.history().len();
        let result = match action {
            Action::Submit(text) => session.submit_query(&engine, &text),
            Action::Clarify(choice) => session.resolve_clarification(&engine, choice),
        };
        result.map(|r| render_step(&r, &session.history()[before..]))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(Json(outcome?))
}

async fn submit(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let map = parse_object(&body)?;
    let text = match map.get("text") {
        Some(Value::String(s)) => s.clone(),
        _ => return Err(ApiError::new(StatusCode::BAD_REQUEST, "field `text` must be a string")),
    };
    if state.slot(&id).is_none() {
        return Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id}")));
    }
    if text.trim().is_empty() {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "empty query"));
    }
    run_action(state, id, Action::Submit(text)).await
}

async fn clarify(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let map = parse_object(&body)?;
    let choice = match map.get("selection") {
        Some(Value::String(s)) if s == "pass" => UserChoice::PassThrough,
        Some(Value::Number(n)) => match n.as_u64() {
            Some(i) => UserChoice::Select(i as usize),
            None => return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("invalid selection {n}"))),
        },
        _ => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "field `selection` must be an option index or \"pass\"",
            ))
        }
    };
    run_action(state, id, Action::Clarify(choice)).await
}

async fn history(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let slot = state
        .slot(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id}")))?;
    let session = slot
        .try_lock_owned()
        .map_err(|_| ApiError::new(StatusCode::CONFLICT, "a request for this session is already running"))?;
    Ok(Json(json!({
        "session_id": id,
        "state": session.state(),
        "entries": session.history(),
    })))
}

async fn health(State(state): State<AppState>) -> Result<Json<Value>, ApiError> {
    let counts = state
        .engine
        .database()
        .table_counts()
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let tables: serde_json::Map<String, Value> = counts.into_iter().map(|(t, n)| (t, json!(n))).collect();
    Ok(Json(json!({
        "status": "ok",
        "version": env!("CARGO_PKG_VERSION"),
        "gateway_mode": state.engine.gateway().mode(),
        "tables": tables,
    })))
}

/// The API router, plus static files from `ui_dir` when it exists.
pub fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/:id/query", post(submit))
        .route("/sessions/:id/clarify", post(clarify))
        .route("/sessions/:id/history", get(history))
        .route("/health", get(health))
        .with_state(state);
    match ui_dir.filter(|d| d.is_dir()) {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(state: AppState, addr: SocketAddr, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state, ui_dir)).await
}
