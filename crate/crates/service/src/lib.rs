//! HTTP/JSON front end over decoding sessions, versioned under `/v1`.
//!
//! Sessions live in memory and expire after an idle period. Mutations on
//! one session are serialized; reads share a lock and only ever observe
//! committed state, because a failed action leaves the session untouched.

pub mod dto;
mod error;

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use ctgs_core::decoder::{SamplingParams, Session, Strategy};
use ctgs_core::filter::{parse_filters, preset, schema, FilterSpec};
use ctgs_core::{Session64, SharedModel64, TokenCatalog, TokenId};
use serde_json::{json, Value};
use uuid::Uuid;

use dto::ContinuationsQuery;
pub use dto::{Action, ActionOutcome, ContextToken, Continuation, ContinuationList, CreateSession, SessionDescriptor};
pub use error::ApiError;

/// Default idle time before a session is dropped.
pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(3600);
/// Default and maximum continuation list sizes.
pub const DEFAULT_CONTINUATIONS: usize = 10;
pub const MAX_CONTINUATIONS: usize = 1000;
/// Upper bound on tokens per `generate` action.
pub const MAX_GENERATE: usize = 10_000;

/// A catalog together with a model over it.
#[derive(Clone)]
pub struct ModelEntry {
    pub catalog: Arc<TokenCatalog>,
    pub model: SharedModel64,
}

/// Models sessions may be created against, by label.
#[derive(Clone, Default)]
pub struct ModelRegistry {
    entries: BTreeMap<String, ModelEntry>,
    default: Option<String>,
}

impl ModelRegistry {
    pub fn new() -> Self {
        ModelRegistry::default()
    }

    /// Registers a model; the first one registered becomes the default.
    pub fn register(&mut self, label: impl Into<String>, catalog: Arc<TokenCatalog>, model: SharedModel64) {
        let label = label.into();
        self.default.get_or_insert_with(|| label.clone());
        self.entries.insert(label, ModelEntry { catalog, model });
    }

    pub fn get(&self, label: &str) -> Option<&ModelEntry> {
        self.entries.get(label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn default_label(&self) -> Option<&str> {
        self.default.as_deref()
    }
}

struct SessionSlot {
    model: String,
    session: RwLock<Session64>,
    last_used: Mutex<Instant>,
}

impl SessionSlot {
    fn touch(&self) {
        *self.last_used.lock().unwrap_or_else(|e| e.into_inner()) = Instant::now();
    }

    fn idle_since(&self) -> Instant {
        *self.last_used.lock().unwrap_or_else(|e| e.into_inner())
    }
}

struct Inner {
    registry: ModelRegistry,
    sessions: Mutex<HashMap<Uuid, Arc<SessionSlot>>>,
    idle_timeout: Duration,
}

/// Shared service state; cheap to clone.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(registry: ModelRegistry) -> Self {
        AppState::with_idle_timeout(registry, DEFAULT_IDLE_TIMEOUT)
    }

    pub fn with_idle_timeout(registry: ModelRegistry, idle_timeout: Duration) -> Self {
        AppState(Arc::new(Inner { registry, sessions: Mutex::new(HashMap::new()), idle_timeout }))
    }

    pub fn session_count(&self) -> usize {
        self.sessions().len()
    }

    /// Drops sessions idle for longer than the timeout; returns how many.
    pub fn purge_expired(&self) -> usize {
        let timeout = self.0.idle_timeout;
        let mut map = self.sessions();
        let before = map.len();
        map.retain(|_, slot| slot.idle_since().elapsed() <= timeout);
        before - map.len()
    }

    fn sessions(&self) -> std::sync::MutexGuard<'_, HashMap<Uuid, Arc<SessionSlot>>> {
        self.0.sessions.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn slot(&self, id: &str) -> Result<(Uuid, Arc<SessionSlot>), ApiError> {
        self.purge_expired();
        let uuid = Uuid::parse_str(id).map_err(|_| ApiError::UnknownSession(id.to_string()))?;
        let slot = self.sessions().get(&uuid).cloned().ok_or_else(|| ApiError::UnknownSession(id.to_string()))?;
        slot.touch();
        Ok((uuid, slot))
    }

    fn create(&self, req: CreateSession) -> Result<SessionDescriptor, ApiError> {
        self.purge_expired();
        let registry = &self.0.registry;
        let label = match req.model {
            Some(m) => m,
            None => registry.default_label().ok_or_else(|| ApiError::UnknownModel(String::new()))?.to_string(),
        };
        let entry = registry.get(&label).ok_or_else(|| ApiError::UnknownModel(label.clone()))?;
        let specs = specs_from(&req.filters, req.preset.as_deref())?;
        let mut sampling = SamplingParams::default();
        if let Some(s) = &req.strategy {
            sampling.strategy = s.parse::<Strategy>().map_err(|e| ApiError::InvalidRequest(e.to_string()))?;
        }
        if let Some(a) = req.alternatives {
            sampling.alternatives = a;
        }
        let session = Session::new(Arc::clone(&entry.catalog), Arc::clone(&entry.model), specs, sampling, req.seed)?;
        let id = Uuid::new_v4();
        let slot = Arc::new(SessionSlot {
            model: label,
            session: RwLock::new(session),
            last_used: Mutex::new(Instant::now()),
        });
        let descriptor = describe(&id, &slot.model, &slot.session.read().unwrap_or_else(|e| e.into_inner()));
        self.sessions().insert(id, slot);
        Ok(descriptor)
    }

    fn remove(&self, id: &str) -> Result<(), ApiError> {
        let (uuid, _) = self.slot(id)?;
        self.sessions().remove(&uuid);
        Ok(())
    }
}

fn specs_from(filters: &[String], preset_name: Option<&str>) -> Result<Vec<FilterSpec>, ApiError> {
    let mut specs = parse_filters(filters)?;
    if let Some(name) = preset_name {
        specs.extend(preset(name)?);
    }
    Ok(specs)
}

fn context_tokens(session: &Session64, ids: &[TokenId], start: usize) -> Vec<ContextToken> {
    let catalog = session.catalog();
    ids.iter()
        .enumerate()
        .map(|(i, &id)| ContextToken {
            id,
            token: catalog.surface(id).to_string(),
            forced: session.history().get(start + i).is_some_and(|r| r.forced),
        })
        .collect()
}

fn describe(id: &Uuid, model: &str, session: &Session64) -> SessionDescriptor {
    SessionDescriptor {
        id: id.to_string(),
        model: model.to_string(),
        filters: session.specs().iter().map(ToString::to_string).collect(),
        strategy: session.sampling().strategy.to_string(),
        seed: session.seed(),
        text: session.text(),
        context: context_tokens(session, session.context(), 0),
        allowed_count: session.allowed().count(),
        history_len: session.history().len(),
    }
}

/// Applies `action`; on error the session is left exactly as it was.
fn apply_action(session: &mut Session64, action: Action) -> Result<Option<Vec<ContextToken>>, ApiError> {
    match action {
        Action::Accept { token_id, token, forced } => {
            let id = match (token_id, token) {
                (Some(id), None) => id,
                (None, Some(surface)) => session
                    .catalog()
                    .id_of(&surface)
                    .ok_or_else(|| ApiError::InvalidRequest(format!("token {surface:?} is not in the vocabulary")))?,
                _ => return Err(ApiError::InvalidRequest("give exactly one of token_id and token".into())),
            };
            session.accept_token(id, forced)?;
            Ok(None)
        }
        Action::Generate { n, backtrack } => {
            if n == 0 || n > MAX_GENERATE {
                return Err(ApiError::InvalidRequest(format!("n must be between 1 and {MAX_GENERATE}")));
            }
            let start = session.context().len();
            let mut trial = session.clone();
            let ids = trial.generate(n, backtrack)?;
            *session = trial;
            Ok(Some(context_tokens(session, &ids, start)))
        }
        Action::Undo { steps } => {
            session.undo(steps)?;
            Ok(None)
        }
        Action::SetFilters { filters, preset } => {
            let specs = specs_from(&filters, preset.as_deref())?;
            session.set_filters(specs)?;
            Ok(None)
        }
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Internal(e.to_string()))?
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload.map(|Json(v)| v).map_err(|e| ApiError::InvalidRequest(e.body_text()))
}

async fn create_session(
    State(state): State<AppState>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionDescriptor>), ApiError> {
    let req = body(payload)?;
    let d = blocking(move || state.create(req)).await?;
    Ok((StatusCode::CREATED, Json(d)))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionDescriptor>, ApiError> {
    blocking(move || {
        let (uuid, slot) = state.slot(&id)?;
        let session = slot.session.read().unwrap_or_else(|e| e.into_inner());
        Ok(describe(&uuid, &slot.model, &session))
    })
    .await
    .map(Json)
}

async fn continuations(
    State(state): State<AppState>,
    Path(id): Path<String>,
    query: Result<Query<ContinuationsQuery>, QueryRejection>,
) -> Result<Json<ContinuationList>, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::InvalidRequest(e.body_text()))?;
    let m = q.m.unwrap_or(DEFAULT_CONTINUATIONS);
    if m == 0 || m > MAX_CONTINUATIONS {
        return Err(ApiError::InvalidRequest(format!("m must be between 1 and {MAX_CONTINUATIONS}")));
    }
    blocking(move || {
        let (_, slot) = state.slot(&id)?;
        let session = slot.session.read().unwrap_or_else(|e| e.into_inner());
        let list = session.list_continuations(m)?;
        let catalog = session.catalog();
        Ok(ContinuationList {
            allowed_count: list.allowed_count,
            entries: list.entries.into_iter().map(|(id, p)| Continuation::new(catalog, id, p)).collect(),
        })
    })
    .await
    .map(Json)
}

async fn act(
    State(state): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<Action>, JsonRejection>,
) -> Result<Json<ActionOutcome>, ApiError> {
    let action = body(payload)?;
    blocking(move || {
        let (uuid, slot) = state.slot(&id)?;
        let mut session = slot.session.write().unwrap_or_else(|e| e.into_inner());
        let generated = apply_action(&mut session, action)?;
        Ok(ActionOutcome { session: describe(&uuid, &slot.model, &session), generated })
    })
    .await
    .map(Json)
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    state.remove(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn filters() -> Json<Value> {
    Json(schema())
}

async fn health(State(state): State<AppState>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "sessions": state.session_count(),
        "models": state.0.registry.labels().collect::<Vec<_>>(),
        "default_model": state.0.registry.default_label(),
    }))
}

async fn not_found() -> ApiError {
    ApiError::NoSuchEndpoint
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session).delete(delete_session))
        .route("/v1/sessions/{id}/continuations", get(continuations))
        .route("/v1/sessions/{id}/actions", post(act))
        .route("/v1/filters", get(filters))
        .route("/v1/health", get(health))
        .fallback(not_found)
        .with_state(state)
}

/// Serves the API on `listener`, purging idle sessions once a minute.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            let n = sweeper.purge_expired();
            if n > 0 {
                log::info!("expired {n} idle sessions");
            }
        }
    });
    axum::serve(listener, router(state)).await
}
