//! Local HTTP+JSON session service.
//!
//! ```text
//! POST /sessions                 {source | path, seed?}  -> session
//! GET  /sessions/{id}/state
//! GET  /sessions/{id}/enabled
//! POST /sessions/{id}/fire       {transition, choice?}
//! POST /sessions/{id}/undo       {k}
//! POST /sessions/{id}/walk       {steps}
//! POST /sessions/{id}/cycle
//! GET  /sessions/{id}/trace      trace file (JSON lines)
//! POST /sessions/{id}/trace      replace the session by a trace
//! GET  /sessions/{id}/events     server-sent state after each change
//! ```
//!
//! State payloads have the shape of a trace step. Each session sits
//! behind its own lock, so commands on it run one at a time.

use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::{broadcast, Mutex, RwLock};
use ttm_core::elaborator::flatten;
use ttm_core::lts::Lts;
use ttm_core::simulator::{model_hash, Session, SimError, TraceFile};

struct Entry {
    session: Mutex<Session>,
    updates: broadcast::Sender<Value>,
}

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<Entry>>>>,
    next: Arc<AtomicU64>,
}

pub fn router() -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/state", get(state))
        .route("/sessions/{id}/enabled", get(enabled))
        .route("/sessions/{id}/fire", post(fire))
        .route("/sessions/{id}/undo", post(undo))
        .route("/sessions/{id}/walk", post(walk))
        .route("/sessions/{id}/cycle", post(cycle))
        .route("/sessions/{id}/trace", get(export).post(import))
        .route("/sessions/{id}/events", get(events))
        .with_state(AppState::default())
}

pub struct ApiError(StatusCode, String, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1, "message": self.2 }))).into_response()
    }
}

impl From<SimError> for ApiError {
    fn from(e: SimError) -> Self {
        let kind = match &e {
            SimError::NotEnabled(_) => "NotEnabled",
            SimError::UnknownTransition(_) => "UnknownTransition",
            SimError::BadChoice { .. } => "BadChoice",
            SimError::BadIndex { .. } => "BadIndex",
            SimError::ModelMismatch { .. } => "ModelMismatch",
            SimError::ReplayDivergence { .. } => "ReplayDivergence",
            SimError::Format { .. } => "Format",
            SimError::Step(_) => "Step",
        };
        let code = match &e {
            SimError::Format { .. } => StatusCode::BAD_REQUEST,
            SimError::ModelMismatch { .. } | SimError::ReplayDivergence { .. } => StatusCode::CONFLICT,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError(code, kind.into(), e.to_string())
    }
}

fn bad_request(kind: &str, msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, kind.into(), msg.into())
}

/// Current configuration as a trace-step object.
pub fn payload(s: &Session) -> Value {
    let last = s.history().last();
    json!({
        "step": s.history().len(),
        "transition": last.map(|m| s.lts().label(m.transition)),
        "choice": last.map(|m| m.choice),
        "digest": s.digest(),
        "config": s.state_json(),
        "cycle_next": s.cycle_next().map(|(t, _)| s.lts().label(t)),
    })
}

async fn entry(st: &AppState, id: &str) -> Result<Arc<Entry>, ApiError> {
    st.sessions
        .read()
        .await
        .get(id)
        .cloned()
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, "UnknownSession".into(), format!("no session `{id}`")))
}

#[derive(Deserialize)]
struct Create {
    source: Option<String>,
    path: Option<String>,
    #[serde(default)]
    seed: u64,
}

async fn create(State(st): State<AppState>, Json(req): Json<Create>) -> Result<Response, ApiError> {
    let text = match (req.source, req.path) {
        (Some(s), None) => s,
        (None, Some(p)) => std::fs::read_to_string(&p).map_err(|e| bad_request("Io", format!("{p}: {e}")))?,
        _ => return Err(bad_request("BadRequest", "give exactly one of `source` and `path`")),
    };
    let src = ttm_core::syntax::parse(&text).map_err(|ds| {
        let msg = ds.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n");
        bad_request("Syntax", msg)
    })?;
    let model = flatten(&src).map_err(|e| bad_request(&e.kind.to_string(), e.to_string()))?;
    let session = Session::with_lts(Arc::new(Lts::new(model)), req.seed)?;
    let id = format!("s{}", st.next.fetch_add(1, Ordering::Relaxed) + 1);
    let body = json!({
        "id": id,
        "model": model_hash(session.model()),
        "seed": req.seed,
        "state": payload(&session),
    });
    let (updates, _) = broadcast::channel(64);
    st.sessions.write().await.insert(
        id,
        Arc::new(Entry {
            session: Mutex::new(session),
            updates,
        }),
    );
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn state(State(st): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let e = entry(&st, &id).await?;
    let s = e.session.lock().await;
    Ok(Json(payload(&s)))
}

async fn enabled(State(st): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let e = entry(&st, &id).await?;
    let s = e.session.lock().await;
    Ok(Json(json!(s.enabled()?)))
}

/// Runs `f` on the session and broadcasts the new state.
async fn mutate(
    st: &AppState,
    id: &str,
    f: impl FnOnce(&mut Session) -> Result<(), SimError>,
) -> Result<Json<Value>, ApiError> {
    let e = entry(st, id).await?;
    let mut s = e.session.lock().await;
    f(&mut s)?;
    let p = payload(&s);
    // No subscribers is fine.
    let _ = e.updates.send(p.clone());
    Ok(Json(p))
}

#[derive(Deserialize)]
struct Fire {
    transition: String,
    choice: Option<usize>,
}

async fn fire(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<Fire>,
) -> Result<Json<Value>, ApiError> {
    mutate(&st, &id, |s| s.fire_label(&req.transition, req.choice).map(|_| ())).await
}

#[derive(Deserialize)]
struct Undo {
    #[serde(default = "one")]
    k: usize,
}

fn one() -> usize {
    1
}

async fn undo(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<Undo>,
) -> Result<Json<Value>, ApiError> {
    mutate(&st, &id, |s| s.undo(req.k).map(|_| ())).await
}

#[derive(Deserialize)]
struct Walk {
    steps: usize,
}

async fn walk(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<Walk>,
) -> Result<Json<Value>, ApiError> {
    mutate(&st, &id, |s| s.random_walk(req.steps).map(|_| ())).await
}

async fn cycle(State(st): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    mutate(&st, &id, |s| s.follow_cycle().map(|_| ())).await
}

async fn export(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let e = entry(&st, &id).await?;
    let s = e.session.lock().await;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], s.export().to_jsonl()).into_response())
}

async fn import(State(st): State<AppState>, Path(id): Path<String>, body: String) -> Result<Json<Value>, ApiError> {
    let trace = TraceFile::from_jsonl(&body)?;
    mutate(&st, &id, |s| {
        let lts = Arc::new(Lts::new(s.lts().model.clone()));
        *s = Session::import(lts, &trace)?;
        Ok(())
    })
    .await
}

async fn events(
    State(st): State<AppState>,
    Path(id): Path<String>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let e = entry(&st, &id).await?;
    let rx = e.updates.subscribe();
    let first = payload(&*e.session.lock().await);
    let stream = stream::unfold((Some(first), rx), |(first, mut rx)| async move {
        if let Some(p) = first {
            return Some((Ok(Event::default().event("state").data(p.to_string())), (None, rx)));
        }
        loop {
            match rx.recv().await {
                Ok(p) => return Some((Ok(Event::default().event("state").data(p.to_string())), (None, rx))),
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

/// Binds `addr` and serves until the process ends. Prints the bound
/// address first so callers can use port 0.
pub async fn run(addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    println!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router()).await
}
