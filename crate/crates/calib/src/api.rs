//! HTTP handlers. All routes live under `/v1`.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fovnoise::ViewingSetup;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::Corpus;
use crate::preview::{centered, PreviewCache, PreviewRequest, DEFAULT_PREVIEW_WIDTH};
use crate::session::{self, Adjustment, Mode, Session, SessionError};

/// Header carrying `ready` or `rendering` on preview responses.
pub const PREVIEW_STATE_HEADER: &str = "x-preview-state";
/// Header carrying the key of the preview actually served.
pub const PREVIEW_KEY_HEADER: &str = "x-preview-key";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub preview_width: usize,
    pub cache_capacity: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            preview_width: DEFAULT_PREVIEW_WIDTH,
            cache_capacity: 32,
        }
    }
}

struct Entry {
    session: Session,
    /// Keys of the previews requested for this session, oldest first.
    preview_keys: Vec<String>,
}

pub struct AppState {
    corpus: Corpus,
    config: ServiceConfig,
    sessions: Mutex<BTreeMap<String, Arc<Mutex<Entry>>>>,
    next_id: AtomicU64,
    previews: PreviewCache,
}

impl AppState {
    pub fn new(corpus: Corpus, config: ServiceConfig) -> Self {
        Self {
            previews: PreviewCache::new(config.cache_capacity),
            corpus,
            config,
            sessions: Mutex::default(),
            next_id: AtomicU64::new(1),
        }
    }

    fn entry(&self, id: &str) -> Result<Arc<Mutex<Entry>>, ApiError> {
        self.sessions
            .lock()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no session {id:?}")))
    }

    fn preview_request(&self, s: &Session, full: bool) -> PreviewRequest {
        PreviewRequest {
            stimulus: s.stimulus.clone(),
            setup: s.setup,
            config: s.config,
            mode: s.mode,
            width: (!full).then_some(self.config.preview_width),
        }
    }

    /// Starts rendering the session's current preview and records its key.
    fn kick(&self, entry: &mut Entry, full: bool) -> (String, tokio::sync::watch::Receiver<Option<crate::preview::Rendered>>) {
        let req = self.preview_request(&entry.session, full);
        let key = req.key();
        let stimulus = self.corpus.get(&req.stimulus).expect("checked at creation").clone();
        let slot = self.previews.ensure(&key, stimulus, req);
        if !full && entry.preview_keys.last() != Some(&key) {
            entry.preview_keys.push(key.clone());
        }
        (key, slot)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/stimuli", get(stimuli))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/param", post(set_param))
        .route("/v1/sessions/{id}/accept", post(accept))
        .route("/v1/sessions/{id}/preview.png", get(preview))
        .route("/v1/export", get(export))
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            kind,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Closed => Self::new(StatusCode::CONFLICT, "closed", e.to_string()),
            SessionError::NotFinite => Self::bad_request(e.to_string()),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message, "kind": self.kind }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// What the UI needs after every change.
#[derive(Debug, Serialize)]
struct Descriptor<'a> {
    id: &'a str,
    stimulus: &'a str,
    mode: Mode,
    blur_rate: f64,
    value: f64,
    range: (f64, f64),
    config: &'a fovnoise::EnhanceConfig,
    accepted: Option<f64>,
    history_len: usize,
    preview_key: &'a str,
    preview_url: String,
}

fn descriptor<'a>(s: &'a Session, key: &'a str) -> Descriptor<'a> {
    Descriptor {
        id: &s.id,
        stimulus: &s.stimulus,
        mode: s.mode,
        blur_rate: s.blur_rate,
        value: s.value(),
        range: s.mode.range(),
        config: &s.config,
        accepted: s.accepted,
        history_len: s.history.len(),
        preview_key: key,
        preview_url: format!("/v1/sessions/{}/preview.png", s.id),
    }
}

async fn stimuli(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let list: Vec<_> = state
        .corpus
        .ids()
        .map(|id| {
            let (w, h) = state.corpus.get(id).expect("listed").dims();
            json!({ "id": id, "width": w, "height": h })
        })
        .collect();
    Json(json!(list))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    stimulus: String,
    mode: Mode,
    blur_rate: f64,
    /// Defaults to the reference display, resampled to the stimulus.
    setup: Option<ViewingSetup>,
    #[serde(default)]
    seed: u64,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Result<Json<CreateBody>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(body) = body?;
    let frame = state
        .corpus
        .get(&body.stimulus)
        .ok_or_else(|| ApiError::not_found(format!("unknown stimulus {:?}", body.stimulus)))?;
    let (lo, hi) = session::BLUR_RATE_RANGE;
    if !(lo..=hi).contains(&body.blur_rate) {
        return Err(ApiError::bad_request(format!("blur_rate {} outside [{lo}, {hi}]", body.blur_rate)));
    }
    let (w, h) = frame.dims();
    let setup = centered(&body.setup.unwrap_or_else(ViewingSetup::reference_display), w, h);
    setup.validate().map_err(|e| ApiError::bad_request(e.to_string()))?;

    let id = format!("s{}", state.next_id.fetch_add(1, Ordering::Relaxed));
    let session = Session::new(id.clone(), body.stimulus, setup, body.mode, body.blur_rate, body.seed);
    let mut entry = Entry {
        session,
        preview_keys: Vec::new(),
    };
    let (key, _) = state.kick(&mut entry, false);
    let out = serde_json::to_value(descriptor(&entry.session, &key)).expect("serializable");
    state
        .sessions
        .lock()
        .expect("sessions lock")
        .insert(id, Arc::new(Mutex::new(entry)));
    Ok((StatusCode::CREATED, Json(out)).into_response())
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    let entry = state.entry(&id)?;
    let entry = entry.lock().expect("session lock");
    let mut v = serde_json::to_value(&entry.session).expect("serializable");
    v["preview_keys"] = json!(entry.preview_keys);
    Ok(Json(v))
}

async fn set_param(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<Adjustment>, JsonRejection>,
) -> ApiResult<Json<serde_json::Value>> {
    let Json(adj) = body?;
    let entry = state.entry(&id)?;
    let mut entry = entry.lock().expect("session lock");
    entry.session.adjust(adj, now_ms())?;
    let (key, _) = state.kick(&mut entry, false);
    Ok(Json(serde_json::to_value(descriptor(&entry.session, &key)).expect("serializable")))
}

async fn accept(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    let entry = state.entry(&id)?;
    let mut entry = entry.lock().expect("session lock");
    let value = entry.session.accept()?;
    let s = &entry.session;
    Ok(Json(json!({
        "id": s.id,
        "stimulus": s.stimulus,
        "mode": s.mode,
        "blur_rate": s.blur_rate,
        "value": value,
    })))
}

#[derive(Debug, Default, Deserialize)]
struct PreviewQuery {
    /// Wait for the current render instead of serving a stale one.
    #[serde(default)]
    wait: bool,
    /// Render at the stimulus resolution; always waits.
    #[serde(default)]
    full: bool,
}

fn png_response(png: &[u8], state: &str, key: &str) -> Response {
    let mut resp = png.to_vec().into_response();
    let h = resp.headers_mut();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static("image/png"));
    h.insert(PREVIEW_STATE_HEADER, HeaderValue::from_str(state).expect("ascii"));
    h.insert(PREVIEW_KEY_HEADER, HeaderValue::from_str(key).expect("hex"));
    resp
}

async fn preview(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<PreviewQuery>,
) -> ApiResult<Response> {
    let entry = state.entry(&id)?;
    let (key, mut slot, stale) = {
        let mut entry = entry.lock().expect("session lock");
        let (key, slot) = state.kick(&mut entry, q.full);
        // Newest finished preview of an earlier setting, if any.
        let stale = entry
            .preview_keys
            .iter()
            .rev()
            .filter(|k| **k != key)
            .find_map(|k| state.previews.ready(k).map(|png| (k.clone(), png)));
        (key, slot, stale)
    };
    let wait = q.wait || q.full;
    if slot.borrow().is_none() && !wait {
        if let Some((old, png)) = stale {
            return Ok(png_response(&png, "rendering", &old));
        }
    }
    let result = slot
        .wait_for(Option::is_some)
        .await
        .map_err(|_| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "render", "render task dropped"))?
        .clone()
        .expect("ready");
    match result {
        Ok(png) => Ok(png_response(&png, "ready", &key)),
        Err(e) => Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "render", e)),
    }
}

async fn export(State(state): State<Arc<AppState>>) -> Json<Vec<session::ExportCell>> {
    let entries: Vec<Arc<Mutex<Entry>>> = state.sessions.lock().expect("sessions lock").values().cloned().collect();
    let sessions: Vec<Session> = entries
        .iter()
        .map(|e| e.lock().expect("session lock").session.clone())
        .collect();
    Json(session::export(&sessions))
}
