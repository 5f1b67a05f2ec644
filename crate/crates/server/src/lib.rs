//! HTTP session service for human-in-the-loop active clustering.
//!
//! Each session runs on its own worker thread and pauses whenever it needs
//! a pairwise answer. Sessions are persisted as append-only JSON-lines
//! event logs and rebuilt at startup by replaying recorded answers.

mod driver;
mod session;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{Mutex, RwLock};
use tower_http::cors::CorsLayer;

use superpac::RunConfig;

pub use session::{LogEvent, NextView, Pending, Reject, Session, SessionError, StateView};

/// Environment variable holding the bind address.
pub const BIND_ENV: &str = "SUPERPAC_BIND";
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    dir: PathBuf,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

impl AppState {
    /// Opens `dir` (created if missing) and resumes every session logged
    /// there. Logs that fail to replay are skipped with a warning.
    pub async fn open(dir: impl Into<PathBuf>) -> std::io::Result<AppState> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        let mut sessions = HashMap::new();
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            match Session::resume(&path).await {
                Ok(s) => {
                    log::info!("resumed session {} from {}", s.id(), path.display());
                    sessions.insert(s.id().to_string(), Arc::new(Mutex::new(s)));
                }
                Err(e) => log::warn!("skipping {}: {e}", path.display()),
            }
        }
        Ok(AppState {
            inner: Arc::new(Inner {
                dir,
                sessions: RwLock::new(sessions),
            }),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.inner.dir
    }

    async fn get(&self, id: &str) -> Option<Arc<Mutex<Session>>> {
        self.inner.sessions.read().await.get(id).cloned()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/next", get(next_query))
        .route("/sessions/{id}/answers", post(submit_answer))
        .route("/sessions/{id}/state", get(session_state))
        .route("/sessions/{id}/trace", get(session_trace))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serves on `addr` until the process is interrupted.
pub async fn serve(addr: &str, dir: impl Into<PathBuf>) -> std::io::Result<()> {
    let state = AppState::open(dir).await?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(json!({ "error": msg.into() }))).into_response()
}

fn not_found(id: &str) -> Response {
    error(StatusCode::NOT_FOUND, format!("no session '{id}'"))
}

#[derive(Serialize)]
struct Created {
    id: String,
}

async fn create_session(State(state): State<AppState>, body: axum::body::Bytes) -> Response {
    let config: RunConfig = match serde_json::from_slice(&body) {
        Ok(c) => c,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("invalid config: {e}")),
    };
    let id = uuid::Uuid::new_v4().simple().to_string();
    match Session::create(id.clone(), config, state.dir()).await {
        Ok(s) => {
            state
                .inner
                .sessions
                .write()
                .await
                .insert(id.clone(), Arc::new(Mutex::new(s)));
            (StatusCode::CREATED, Json(Created { id })).into_response()
        }
        Err(SessionError::Config(msg)) => error(StatusCode::BAD_REQUEST, msg),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn next_query(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    match state.get(&id).await {
        Some(s) => Json(s.lock().await.next()).into_response(),
        None => not_found(&id),
    }
}

#[derive(Debug, Deserialize)]
struct Answer {
    query_id: u64,
    must_link: bool,
}

async fn submit_answer(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(answer): Json<Answer>,
) -> Response {
    let Some(s) = state.get(&id).await else {
        return not_found(&id);
    };
    let mut s = s.lock().await;
    match s.submit(answer.query_id, answer.must_link).await {
        Ok(Ok(())) => Json(json!({ "accepted": true })).into_response(),
        Ok(Err(reject)) => (
            StatusCode::CONFLICT,
            Json(json!({ "accepted": false, "reason": reject.reason() })),
        )
            .into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn session_state(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    match state.get(&id).await {
        Some(s) => Json(s.lock().await.state()).into_response(),
        None => not_found(&id),
    }
}

async fn session_trace(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    match state.get(&id).await {
        Some(s) => (
            [(header::CONTENT_TYPE, "text/csv")],
            s.lock().await.trace_csv(),
        )
            .into_response(),
        None => not_found(&id),
    }
}
