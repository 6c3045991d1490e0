//! HTTP facade over teaching sessions.
//!
//! Every session runs on its own thread and applies commands strictly in
//! arrival order. Readers (state, frames, event streams) never touch the
//! session itself; they read a shared view that the session's observer keeps
//! up to date, so they are served while an exploration is running.
//!
//! Routes (all JSON unless noted):
//!
//! | method | path                                   | body / query                    |
//! |--------|----------------------------------------|---------------------------------|
//! | POST   | `/v1/sessions`                         | `{scene_path?, config?}`        |
//! | POST   | `/v1/sessions/{id}/commands`           | `{utterance}`                   |
//! | GET    | `/v1/sessions/{id}/state`              |                                 |
//! | GET    | `/v1/sessions/{id}/frames/{view}`      | `view` is an index or `current` |
//! | GET    | `/v1/sessions/{id}/events`             | SSE; `?after=n` or `Last-Event-ID` |
//! | GET    | `/v1/sessions/{id}/history`            | `?after=n`                      |
//! | GET    | `/v1/sessions/{id}/registry`           | registry text file              |
//! | GET    | `/v1/sessions/{id}/log`                | event log, JSON lines           |

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::convert::Infallible;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc, Mutex, RwLock};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response as HttpResponse};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use futures::stream::{self, Stream, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, oneshot};

use canonview::gov::GovScore;
use canonview::renderer::pnm::encode_ppm;
use canonview::segmenter::BBox;
use canonview::session::{DetectionPayload, FrameEntry, Response, Session, SessionEvent, SessionSnapshot};
use canonview::store::{load_scene, registry_to_text, Config};

pub const API_VERSION: u32 = 1;

/// One pushed event. Sequence numbers start at 1 and increase by one per
/// session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireEvent {
    pub seq: u64,
    #[serde(flatten)]
    pub body: WireBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WireBody {
    StateChanged {
        snapshot: SessionSnapshot,
    },
    ViewEvaluated {
        view: usize,
        score: GovScore,
        /// Path of the cached frame for this view.
        thumbnail: String,
    },
    Detection {
        detections: Vec<DetectionPayload>,
    },
    ProtocolReply {
        reply: Response,
    },
}

impl WireBody {
    pub fn name(&self) -> &'static str {
        match self {
            WireBody::StateChanged { .. } => "state_changed",
            WireBody::ViewEvaluated { .. } => "view_evaluated",
            WireBody::Detection { .. } => "detection",
            WireBody::ProtocolReply { .. } => "protocol_reply",
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    #[serde(default)]
    pub scene_path: Option<String>,
    #[serde(default)]
    pub config: Option<Config>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
    pub snapshot: SessionSnapshot,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandBody {
    pub utterance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayBox {
    pub label: String,
    pub score: f64,
    pub bbox: BBox,
    pub pointing: [f64; 3],
}

/// Annotation layer in pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overlay {
    pub boxes: Vec<OverlayBox>,
    /// Boundary pixels `[x, y]` of the frame's object mask.
    pub mask_outline: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePayload {
    pub view: usize,
    pub width: usize,
    pub height: usize,
    /// Always `"ppm"` (binary P6).
    pub encoding: String,
    /// Base64 of the encoded image.
    pub image: String,
    pub overlay: Overlay,
}

impl FramePayload {
    pub fn from_entry(e: &FrameEntry) -> Self {
        let ppm = encode_ppm(e.frame.width, e.frame.height, &e.frame.color);
        let mut outline = Vec::new();
        for y in 0..e.mask.height() {
            for x in 0..e.mask.width() {
                if e.mask.get(x, y) && e.mask.is_boundary(x, y) {
                    outline.push([x, y]);
                }
            }
        }
        Self {
            view: e.view,
            width: e.frame.width,
            height: e.frame.height,
            encoding: "ppm".into(),
            image: base64::engine::general_purpose::STANDARD.encode(ppm),
            overlay: Overlay {
                boxes: e
                    .detections
                    .iter()
                    .map(|d| OverlayBox {
                        label: d.label.clone(),
                        score: d.score,
                        bbox: d.bbox,
                        pointing: d.pointing,
                    })
                    .collect(),
                mask_outline: outline,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ApiError {
    UnknownSession(String),
    UnknownView(String),
    BadRequest(String),
    QueueClosed,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> HttpResponse {
        let (status, message) = match self {
            ApiError::UnknownSession(id) => (StatusCode::NOT_FOUND, format!("unknown session `{id}`")),
            ApiError::UnknownView(v) => (StatusCode::NOT_FOUND, format!("no cached frame for view `{v}`")),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::QueueClosed => (
                StatusCode::SERVICE_UNAVAILABLE,
                "session command queue is closed".into(),
            ),
        };
        (status, Json(serde_json::json!({ "error": message }))).into_response()
    }
}

struct View {
    events: Vec<WireEvent>,
    snapshot: SessionSnapshot,
    frames: BTreeMap<usize, FrameEntry>,
    current: Option<usize>,
    registry: String,
    log: String,
}

struct Shared {
    id: String,
    view: Mutex<View>,
    live: broadcast::Sender<WireEvent>,
}

impl Shared {
    fn push(&self, view: &mut View, body: WireBody) {
        let ev = WireEvent {
            seq: view.events.len() as u64 + 1,
            body,
        };
        view.events.push(ev.clone());
        let _ = self.live.send(ev);
    }

    fn observe(&self, e: &SessionEvent) {
        let mut view = self.view.lock().expect("view lock");
        match e {
            SessionEvent::FrameCaptured(f) => {
                view.frames.insert(f.view, f.clone());
                view.current = Some(f.view);
            }
            SessionEvent::StateChanged(s) => {
                view.snapshot = s.clone();
                self.push(&mut view, WireBody::StateChanged { snapshot: s.clone() });
            }
            SessionEvent::ViewEvaluated { view: v, score } => {
                let thumbnail = format!("/v1/sessions/{}/frames/{v}", self.id);
                self.push(
                    &mut view,
                    WireBody::ViewEvaluated {
                        view: *v,
                        score: *score,
                        thumbnail,
                    },
                );
            }
            SessionEvent::Detections(d) => self.push(&mut view, WireBody::Detection { detections: d.clone() }),
            SessionEvent::Reply(r) => self.push(&mut view, WireBody::ProtocolReply { reply: r.clone() }),
        }
    }

    fn history(&self, after: u64) -> Vec<WireEvent> {
        let view = self.view.lock().expect("view lock");
        view.events.iter().skip(after as usize).cloned().collect()
    }
}

struct Job {
    utterance: String,
    reply: oneshot::Sender<Response>,
}

/// A running session: its command queue and shared read view.
pub struct SessionHandle {
    jobs: Mutex<mpsc::Sender<Job>>,
    shared: Arc<Shared>,
}

impl SessionHandle {
    fn spawn(id: String, mut session: Session) -> Self {
        let (live, _) = broadcast::channel(1024);
        let shared = Arc::new(Shared {
            id,
            view: Mutex::new(View {
                events: Vec::new(),
                snapshot: session.snapshot(),
                frames: BTreeMap::new(),
                current: None,
                registry: registry_to_text(session.registry()),
                log: session.log_jsonl(),
            }),
            live,
        });
        let sink = shared.clone();
        session.set_observer(move |e| sink.observe(e));
        let (tx, rx) = mpsc::channel::<Job>();
        let worker = shared.clone();
        std::thread::spawn(move || {
            for job in rx {
                let reply = session.handle(&job.utterance);
                {
                    let mut view = worker.view.lock().expect("view lock");
                    view.snapshot = session.snapshot();
                    view.registry = registry_to_text(session.registry());
                    view.log = session.log_jsonl();
                }
                let _ = job.reply.send(reply);
            }
        });
        Self {
            jobs: Mutex::new(tx),
            shared,
        }
    }

    /// Queue an utterance; resolves once the session has applied it.
    pub async fn submit(&self, utterance: String) -> Result<Response, ApiError> {
        let (tx, rx) = oneshot::channel();
        self.jobs
            .lock()
            .expect("queue lock")
            .send(Job { utterance, reply: tx })
            .map_err(|_| ApiError::QueueClosed)?;
        rx.await.map_err(|_| ApiError::QueueClosed)
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        self.shared.view.lock().expect("view lock").snapshot.clone()
    }

    pub fn history(&self, after: u64) -> Vec<WireEvent> {
        self.shared.history(after)
    }

    /// Events with `seq > after`: the stored ones, then live ones as they
    /// arrive.
    pub fn stream(&self, after: u64) -> impl Stream<Item = WireEvent> + Send + 'static {
        let (backlog, rx) = {
            let view = self.shared.view.lock().expect("view lock");
            let backlog: VecDeque<WireEvent> = view.events.iter().skip(after as usize).cloned().collect();
            (backlog, self.shared.live.subscribe())
        };
        let last = backlog.back().map_or(after, |e| e.seq);
        let shared = self.shared.clone();
        stream::unfold(
            (backlog, rx, last, shared),
            |(mut pending, mut rx, mut last, shared)| async move {
                loop {
                    if let Some(ev) = pending.pop_front() {
                        last = ev.seq;
                        return Some((ev, (pending, rx, last, shared)));
                    }
                    match rx.recv().await {
                        Ok(ev) if ev.seq > last => {
                            last = ev.seq;
                            return Some((ev, (pending, rx, last, shared)));
                        }
                        Ok(_) => continue,
                        Err(broadcast::error::RecvError::Lagged(_)) => pending = shared.history(last).into(),
                        Err(broadcast::error::RecvError::Closed) => return None,
                    }
                }
            },
        )
    }
}

/// Process-wide session table.
pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<SessionHandle>>>,
    next: AtomicU64,
    defaults: Config,
}

impl AppState {
    pub fn new(defaults: Config) -> Arc<Self> {
        Arc::new(Self {
            sessions: RwLock::new(HashMap::new()),
            next: AtomicU64::new(1),
            defaults,
        })
    }

    pub fn create(&self, req: CreateSession) -> Result<(String, Arc<SessionHandle>), ApiError> {
        let config = req.config.unwrap_or_else(|| self.defaults.clone());
        let scene = match &req.scene_path {
            Some(p) => Some(load_scene(Path::new(p)).map_err(|e| ApiError::BadRequest(e.to_string()))?),
            None => None,
        };
        let session = Session::new(config, scene, req.scene_path).map_err(|e| ApiError::BadRequest(e.to_string()))?;
        let id = format!("s{}", self.next.fetch_add(1, Ordering::Relaxed));
        let handle = Arc::new(SessionHandle::spawn(id.clone(), session));
        self.sessions
            .write()
            .expect("session table lock")
            .insert(id.clone(), handle.clone());
        Ok((id, handle))
    }

    pub fn get(&self, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        self.sessions
            .read()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::UnknownSession(id.to_string()))
    }
}

type AppRef = Arc<AppState>;

async fn create_session(
    State(app): State<AppRef>,
    body: Result<Json<CreateSession>, axum::extract::rejection::JsonRejection>,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let Json(req) = body.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let (id, handle) = app.create(req)?;
    Ok((
        StatusCode::CREATED,
        Json(Created {
            id,
            snapshot: handle.snapshot(),
        }),
    ))
}

async fn submit_command(
    State(app): State<AppRef>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<CommandBody>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<Response>, ApiError> {
    let handle = app.get(&id)?;
    let Json(cmd) = body.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    handle.submit(cmd.utterance).await.map(Json)
}

async fn get_state(State(app): State<AppRef>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionSnapshot>, ApiError> {
    Ok(Json(app.get(&id)?.snapshot()))
}

async fn get_frame(
    State(app): State<AppRef>,
    UrlPath((id, view)): UrlPath<(String, String)>,
) -> Result<Json<FramePayload>, ApiError> {
    let handle = app.get(&id)?;
    let v = handle.shared.view.lock().expect("view lock");
    let index = if view == "current" {
        v.current
    } else {
        view.parse::<usize>().ok()
    };
    let entry = index
        .and_then(|i| v.frames.get(&i))
        .ok_or_else(|| ApiError::UnknownView(view.clone()))?;
    Ok(Json(FramePayload::from_entry(entry)))
}

#[derive(Debug, Deserialize)]
struct After {
    after: Option<u64>,
}

async fn get_history(
    State(app): State<AppRef>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<After>,
) -> Result<Json<Vec<WireEvent>>, ApiError> {
    Ok(Json(app.get(&id)?.history(q.after.unwrap_or(0))))
}

async fn stream_events(
    State(app): State<AppRef>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<After>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let handle = app.get(&id)?;
    let from_header = headers
        .get("last-event-id")
        .and_then(|h| h.to_str().ok())
        .and_then(|s| s.trim().parse::<u64>().ok());
    let after = q.after.or(from_header).unwrap_or(0);
    let events = handle.stream(after).map(|ev| {
        Ok(Event::default()
            .id(ev.seq.to_string())
            .event(ev.body.name())
            .data(serde_json::to_string(&ev).expect("wire events serialise")))
    });
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}

async fn get_registry(State(app): State<AppRef>, UrlPath(id): UrlPath<String>) -> Result<HttpResponse, ApiError> {
    let handle = app.get(&id)?;
    let text = handle.shared.view.lock().expect("view lock").registry.clone();
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text).into_response())
}

async fn get_log(State(app): State<AppRef>, UrlPath(id): UrlPath<String>) -> Result<HttpResponse, ApiError> {
    let handle = app.get(&id)?;
    let text = handle.shared.view.lock().expect("view lock").log.clone();
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

pub fn router(app: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}/commands", post(submit_command))
        .route("/v1/sessions/{id}/state", get(get_state))
        .route("/v1/sessions/{id}/frames/{view}", get(get_frame))
        .route("/v1/sessions/{id}/events", get(stream_events))
        .route("/v1/sessions/{id}/history", get(get_history))
        .route("/v1/sessions/{id}/registry", get(get_registry))
        .route("/v1/sessions/{id}/log", get(get_log))
        .with_state(app)
}

/// Serve until the process is stopped.
pub async fn serve(addr: SocketAddr, defaults: Config) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(AppState::new(defaults))).await
}
