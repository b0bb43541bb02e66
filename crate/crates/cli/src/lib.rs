//! HTTP conversation service and line REPL over the dialogue engine.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use kgchat_core::dialogue::SessionState;
use kgchat_core::engine::{Engine, EngineError, TurnRequest, TurnResponse};
use kgchat_core::kg::Triple;
use kgchat_core::nlu::Hypothesis;
use serde::{Deserialize, Serialize};

pub struct AppState {
    engine: Arc<Engine>,
    /// One FIFO gate per conversation; tokio mutexes queue waiters in order.
    gates: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

impl AppState {
    pub fn new(engine: Arc<Engine>) -> Self {
        AppState {
            engine,
            gates: Mutex::new(HashMap::new()),
        }
    }

    fn gate(&self, conversation_id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.gates
            .lock()
            .expect("gate map poisoned")
            .entry(conversation_id.to_string())
            .or_default()
            .clone()
    }
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/conversations", post(create_conversation))
        .route("/api/conversations/{id}", get(conversation))
        .route("/api/conversations/{id}/turns", post(turn))
        .route("/api/users/{id}/profile", get(profile))
        .with_state(Arc::new(AppState::new(engine)))
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::UnknownConversation(_) => StatusCode::NOT_FOUND,
            EngineError::InvalidUser(_) | EngineError::Nlu(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError {
            status,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            log::error!("{}", self.message);
        }
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

#[derive(Debug, Deserialize)]
pub struct CreateConversation {
    pub user_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ConversationCreated {
    pub conversation_id: String,
}

async fn create_conversation(
    State(app): State<Arc<AppState>>,
    Json(body): Json<CreateConversation>,
) -> Result<(StatusCode, Json<ConversationCreated>), ApiError> {
    let engine = app.engine.clone();
    let conversation_id = blocking(move || engine.create_conversation(&body.user_id)).await?;
    Ok((StatusCode::CREATED, Json(ConversationCreated { conversation_id })))
}

async fn conversation(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionState>, ApiError> {
    let engine = app.engine.clone();
    Ok(Json(blocking(move || engine.session(&id)).await?))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HypothesisIn {
    pub text: String,
    #[serde(default = "certain")]
    pub confidence: f64,
}

fn certain() -> f64 {
    1.0
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TurnBody {
    pub hypotheses: Vec<HypothesisIn>,
    #[serde(default)]
    pub nonce: Option<String>,
}

async fn turn(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<TurnBody>,
) -> Result<Json<TurnResponse>, ApiError> {
    if body.hypotheses.is_empty() {
        return Err(ApiError::bad_request("at least one hypothesis is required"));
    }
    let hypotheses = body
        .hypotheses
        .iter()
        .map(|h| Hypothesis::typed(&h.text, h.confidence))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let request = TurnRequest {
        conversation_id: id.clone(),
        hypotheses,
        nonce: body.nonce,
    };
    let gate = app.gate(&id);
    let _turn = gate.lock().await;
    let engine = app.engine.clone();
    Ok(Json(blocking(move || engine.handle_turn(&request)).await?))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Profile {
    pub user_id: String,
    pub facts: Vec<Triple>,
}

async fn profile(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Profile>, ApiError> {
    let engine = app.engine.clone();
    let user_id = id.clone();
    let facts = blocking(move || engine.profile(&id)).await?;
    Ok(Json(Profile { user_id, facts }))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, EngineError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: format!("turn worker failed: {e}"),
        })?
        .map_err(ApiError::from)
}

/// One learned fact per line.
pub fn format_fact(t: &Triple) -> String {
    let tense = format!("{:?}", t.tense).to_lowercase();
    format!("{} {} {} ({tense})", t.domain_id, t.property_id, t.range_value)
}

/// Line-oriented chat. `/debug` toggles traces, `/reset` starts a new
/// conversation for the same user, `/quit` ends.
pub struct Repl<'a> {
    engine: &'a Engine,
    user_id: String,
    conversation_id: String,
    pub debug: bool,
}

impl<'a> Repl<'a> {
    pub fn new(engine: &'a Engine, user_id: &str, debug: bool) -> Result<Self, EngineError> {
        Ok(Repl {
            engine,
            user_id: user_id.to_string(),
            conversation_id: engine.create_conversation(user_id)?,
            debug,
        })
    }

    pub fn conversation_id(&self) -> &str {
        &self.conversation_id
    }

    pub fn run(&mut self, input: impl BufRead, mut out: impl Write, prompt: bool) -> io::Result<()> {
        if prompt {
            write!(out, "> ")?;
            out.flush()?;
        }
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            match line {
                "" => {}
                "/quit" | "/exit" => break,
                "/debug" => {
                    self.debug = !self.debug;
                    writeln!(out, "[debug {}]", if self.debug { "on" } else { "off" })?;
                }
                "/reset" => match self.engine.create_conversation(&self.user_id) {
                    Ok(id) => {
                        self.conversation_id = id;
                        writeln!(out, "[new conversation]")?;
                    }
                    Err(e) => writeln!(out, "[error: {e}]")?,
                },
                text => match TurnRequest::typed(&self.conversation_id, text)
                    .map_err(EngineError::from)
                    .and_then(|r| self.engine.handle_turn(&r))
                {
                    Ok(r) => {
                        writeln!(out, "{}", r.text)?;
                        if self.debug {
                            write_trace(&mut out, &r)?;
                        }
                    }
                    Err(e) => writeln!(out, "[error: {e}]")?,
                },
            }
            if prompt {
                write!(out, "> ")?;
                out.flush()?;
            }
        }
        Ok(())
    }
}

fn write_trace(out: &mut impl Write, r: &TurnResponse) -> io::Result<()> {
    let d = &r.debug;
    for s in d.segments.iter().filter(|s| s.segment.hypothesis_index == d.hypothesis_index) {
        let acts: Vec<String> = s.annotations.dialogue_acts.iter().map(|a| format!("{} {:.2}", a.act, a.confidence)).collect();
        writeln!(out, "  segment {:?}: {}", s.segment.text, acts.join(", "))?;
    }
    for a in &d.selected {
        writeln!(
            out,
            "  selected {} ({}, {}) {:.3}",
            a.pair_id,
            a.da,
            a.property_id.as_deref().unwrap_or("-"),
            a.confidence
        )?;
    }
    for k in &d.appended {
        writeln!(out, "  appended {k:?}")?;
    }
    let stack: Vec<String> = d.pair_stack.iter().map(|p| format!("{}@{}", p.pair_id, p.current_node)).collect();
    writeln!(out, "  stack [{}]", stack.join(", "))?;
    let total: u128 = d.timings.iter().map(|t| t.micros).sum();
    writeln!(out, "  {total} µs")
}
