//! The teaching protocol.
//!
//! Typed utterances are matched against a handful of keyword templates and
//! drive a small state machine:
//!
//! ```text
//! Idle --start--> AwaitingLabel --"this is X"--> (explore, augment, register) --> Ready
//! Ready --flip--> explore the flipped scene, add its samples to X --> Ready
//! Ready --done--> Ready (registration closed)     Idle/Ready --"where is X"--> answer
//! ```
//!
//! Every accepted input is appended to an event log from which the session
//! can be rebuilt exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augmenter::build_training_set;
use crate::capture::{capture_view, Capture};
use crate::derive_seed;
use crate::detector::{detect, Detection, DetectorBackend, Registry};
use crate::explorer::{select_canonical, Evaluation, Explorer, SceneEvaluator, ViewEvaluator};
use crate::gov::GovScore;
use crate::renderer::{RgbdFrame, SceneSpec};
use crate::segmenter::{BBox, ObjectMask};
use crate::store::{load_scene, Config, StoreError};
use crate::viewsphere::ViewSphere;

// --------------------------------------------------------------- parsing

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", content = "argument", rename_all = "snake_case")]
pub enum Command {
    StartRegistration,
    Label(String),
    Flip,
    FinishRegistration,
    Query(String),
    ListObjects,
    LoadScene(String),
    Quit,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("I did not understand `{0}`")]
    Unrecognized(String),
    #[error("`{0}` needs an object name")]
    MissingName(String),
}

/// Lowercase, turn punctuation into spaces and collapse whitespace.
fn normalize(text: &str) -> String {
    let cleaned: String = text
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '-' || c == '_' {
                c.to_ascii_lowercase()
            } else {
                ' '
            }
        })
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Normalised object name with a leading article removed.
pub fn normalize_name(text: &str) -> String {
    let n = normalize(text);
    for article in ["the ", "a ", "an "] {
        if let Some(rest) = n.strip_prefix(article) {
            return rest.to_string();
        }
    }
    n
}

/// Keyword-template parser.
pub fn parse_command(utterance: &str) -> Result<Command, ParseError> {
    let raw = utterance.trim();
    let lower = raw.to_lowercase();
    for prefix in ["load scene ", "load "] {
        if lower.starts_with(prefix) {
            let path = raw[prefix.len()..].trim();
            if !path.is_empty() {
                return Ok(Command::LoadScene(path.to_string()));
            }
        }
    }
    let text = normalize(raw);
    let named = |rest: &str, make: fn(String) -> Command| {
        let name = normalize_name(rest);
        if name.is_empty() {
            Err(ParseError::MissingName(raw.to_string()))
        } else {
            Ok(make(name))
        }
    };
    if let Some(rest) = text.strip_prefix("this is") {
        if rest.is_empty() || rest.starts_with(' ') {
            return named(rest, Command::Label);
        }
    }
    if let Some(rest) = text.strip_prefix("where is") {
        if rest.is_empty() || rest.starts_with(' ') {
            return named(rest, Command::Query);
        }
    }
    let words: Vec<&str> = text.split(' ').collect();
    let has = |w: &str| words.contains(&w);
    if has("start") && (has("registration") || has("register")) {
        return Ok(Command::StartRegistration);
    }
    if has("flip") || has("flipped") {
        return Ok(Command::Flip);
    }
    if has("done") || has("finish") || has("finished") {
        return Ok(Command::FinishRegistration);
    }
    if has("list") {
        return Ok(Command::ListObjects);
    }
    if has("quit") || has("exit") {
        return Ok(Command::Quit);
    }
    Err(ParseError::Unrecognized(raw.to_string()))
}

// ----------------------------------------------------------------- state

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum SessionState {
    Idle,
    AwaitingLabel,
    Exploring { object: String, evaluated: usize },
    Ready { open: Option<String> },
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SessionState::Idle => f.write_str("idle"),
            SessionState::AwaitingLabel => f.write_str("awaiting label"),
            SessionState::Exploring { object, evaluated } => write!(f, "exploring {object} ({evaluated} views)"),
            SessionState::Ready { open: Some(o) } => write!(f, "ready (registering {o})"),
            SessionState::Ready { open: None } => f.write_str("ready"),
        }
    }
}

/// Where a detection is and which way the arm would point at it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionPayload {
    pub label: String,
    pub bbox: BBox,
    pub score: f64,
    pub view: usize,
    /// Unit vector from the camera towards the object (world frame).
    pub pointing: [f64; 3],
    /// Mean of the object's back-projected points (world frame, mm).
    pub target: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    /// `false` for protocol errors: unrecognised input, a command that is
    /// illegal in the current state, or a failed action.
    pub ok: bool,
    pub text: String,
    pub state: SessionState,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detection: Option<DetectionPayload>,
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub quit: bool,
}

/// Read-only summary for clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub state: SessionState,
    pub objects: Vec<String>,
    pub scene_loaded: bool,
    pub scene_path: Option<String>,
    pub frames: Vec<usize>,
    pub current_view: Option<usize>,
}

/// A cached camera frame with what the session found in it.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameEntry {
    pub view: usize,
    pub frame: RgbdFrame,
    pub mask: ObjectMask,
    pub detections: Vec<DetectionPayload>,
}

/// Progress notifications emitted while commands run.
#[derive(Debug, Clone, PartialEq)]
pub enum SessionEvent {
    StateChanged(SessionSnapshot),
    /// A frame entered the cache; sent before the matching `ViewEvaluated`.
    FrameCaptured(FrameEntry),
    ViewEvaluated {
        view: usize,
        score: GovScore,
    },
    Detections(Vec<DetectionPayload>),
    Reply(Response),
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Init {
        version: u32,
        config: Box<Config>,
        scene_path: Option<String>,
        scene: Option<Box<SceneSpec>>,
    },
    Command {
        utterance: String,
    },
    SceneLoaded {
        path: String,
        scene: Box<SceneSpec>,
    },
}

pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("invalid configuration: {0}")]
    Sphere(#[from] crate::viewsphere::SphereError),
    #[error("event log line {line}: {message}")]
    CorruptLog { line: usize, message: String },
}

type Observer = Box<dyn FnMut(&SessionEvent) + Send>;

pub struct Session {
    config: Config,
    sphere: ViewSphere,
    scene: Option<SceneSpec>,
    scene_path: Option<String>,
    state: SessionState,
    registry: Registry,
    log: Vec<LogRecord>,
    frames: BTreeMap<usize, FrameEntry>,
    current_view: Option<usize>,
    passes: u64,
    observer: Option<Observer>,
}

impl fmt::Debug for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Session")
            .field("state", &self.state)
            .field("objects", &self.registry.names())
            .field("scene_path", &self.scene_path)
            .finish_non_exhaustive()
    }
}

impl Session {
    pub fn new(config: Config, scene: Option<SceneSpec>, scene_path: Option<String>) -> Result<Self, SessionError> {
        config.validate()?;
        let sphere = config.sphere.build()?;
        let registry = Registry::new(config.detector.unknown_threshold);
        let init = LogRecord::Init {
            version: LOG_VERSION,
            config: Box::new(config.clone()),
            scene_path: scene_path.clone(),
            scene: scene.clone().map(Box::new),
        };
        Ok(Self {
            config,
            sphere,
            scene,
            scene_path,
            state: SessionState::Idle,
            registry,
            log: vec![init],
            frames: BTreeMap::new(),
            current_view: None,
            passes: 0,
            observer: None,
        })
    }

    /// Open a session on a scene file.
    pub fn with_scene_file(config: Config, path: &Path) -> Result<Self, SessionError> {
        let scene = load_scene(path)?;
        Self::new(config, Some(scene), Some(path.display().to_string()))
    }

    pub fn set_observer(&mut self, f: impl FnMut(&SessionEvent) + Send + 'static) {
        self.observer = Some(Box::new(f));
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn scene(&self) -> Option<&SceneSpec> {
        self.scene.as_ref()
    }

    pub fn sphere(&self) -> &ViewSphere {
        &self.sphere
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    pub fn frame(&self, view: usize) -> Option<&FrameEntry> {
        self.frames.get(&view)
    }

    pub fn current_frame(&self) -> Option<&FrameEntry> {
        self.current_view.and_then(|v| self.frames.get(&v))
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            state: self.state.clone(),
            objects: self.registry.names().into_iter().map(String::from).collect(),
            scene_loaded: self.scene.is_some(),
            scene_path: self.scene_path.clone(),
            frames: self.frames.keys().copied().collect(),
            current_view: self.current_view,
        }
    }

    /// The log as JSON lines.
    pub fn log_jsonl(&self) -> String {
        self.log.iter().map(|r| record_to_line(r) + "\n").collect()
    }

    fn emit(&mut self, event: SessionEvent) {
        if let Some(obs) = self.observer.as_mut() {
            obs(&event);
        }
    }

    fn set_state(&mut self, state: SessionState) {
        if self.state != state {
            self.state = state;
            let snap = self.snapshot();
            self.emit(SessionEvent::StateChanged(snap));
        }
    }

    fn reply(&mut self, ok: bool, text: impl Into<String>) -> Response {
        let r = Response {
            ok,
            text: text.into(),
            state: self.state.clone(),
            detection: None,
            quit: false,
        };
        self.emit(SessionEvent::Reply(r.clone()));
        r
    }

    /// Parse and execute one utterance, logging it.
    pub fn handle(&mut self, utterance: &str) -> Response {
        match parse_command(utterance) {
            Ok(Command::LoadScene(path)) => self.load_scene_file(&path),
            Ok(cmd) => {
                self.log.push(LogRecord::Command {
                    utterance: utterance.to_string(),
                });
                self.step(cmd)
            }
            Err(e) => {
                self.log.push(LogRecord::Command {
                    utterance: utterance.to_string(),
                });
                let text = match e {
                    ParseError::Unrecognized(_) => "I did not understand.".to_string(),
                    other => other.to_string(),
                };
                self.reply(false, text)
            }
        }
    }

    fn load_scene_file(&mut self, path: &str) -> Response {
        if let SessionState::Exploring { .. } = self.state {
            return self.reply(false, "busy: an exploration is running");
        }
        match load_scene(Path::new(path)) {
            Ok(scene) => {
                self.log.push(LogRecord::SceneLoaded {
                    path: path.to_string(),
                    scene: Box::new(scene.clone()),
                });
                self.install_scene(path.to_string(), scene)
            }
            Err(e) => self.reply(false, format!("could not load scene: {e}")),
        }
    }

    fn install_scene(&mut self, path: String, scene: SceneSpec) -> Response {
        let n = scene.objects.len();
        self.scene = Some(scene);
        self.scene_path = Some(path.clone());
        self.frames.clear();
        self.current_view = None;
        let snap = self.snapshot();
        self.emit(SessionEvent::StateChanged(snap));
        self.reply(true, format!("Loaded scene {path} with {n} object(s)."))
    }

    /// Apply a parsed command. Never panics or aborts; illegal commands leave
    /// the state unchanged and explain why.
    pub fn step(&mut self, cmd: Command) -> Response {
        use SessionState::*;
        if let Exploring { .. } = self.state {
            return self.reply(false, "busy: an exploration is running");
        }
        match (self.state.clone(), cmd) {
            (_, Command::Quit) => {
                let mut r = self.reply(true, "Goodbye.");
                r.quit = true;
                r
            }
            (_, Command::ListObjects) => {
                let names = self.registry.names();
                let text = if names.is_empty() {
                    "No objects registered.".to_string()
                } else {
                    format!("Registered objects: {}.", names.join(", "))
                };
                self.reply(true, text)
            }
            (_, Command::LoadScene(path)) => self.load_scene_file(&path),
            (AwaitingLabel, Command::StartRegistration) => {
                self.reply(false, "Already waiting for a name: say \"this is <name>\".")
            }
            (Idle | Ready { .. }, Command::StartRegistration) => {
                self.set_state(AwaitingLabel);
                self.reply(
                    true,
                    "Registration started. Show me the object and say \"this is <name>\".",
                )
            }
            (AwaitingLabel, Command::Label(name)) => self.register(name),
            (_, Command::Label(_)) => self.reply(false, "Say \"start object registration\" before naming an object."),
            (Ready { open: Some(name) }, Command::Flip) => self.flip(name),
            (_, Command::Flip) => self.reply(false, "Nothing to flip: no registration is open."),
            (Ready { open: Some(name) }, Command::FinishRegistration) => {
                self.set_state(Ready { open: None });
                self.reply(true, format!("Registration of {name} finished."))
            }
            (AwaitingLabel, Command::FinishRegistration) => {
                let next = if self.registry.is_empty() {
                    Idle
                } else {
                    Ready { open: None }
                };
                self.set_state(next);
                self.reply(true, "Registration cancelled.")
            }
            (_, Command::FinishRegistration) => self.reply(false, "No registration is open."),
            (AwaitingLabel, Command::Query(_)) => self.reply(false, "Name the object first: say \"this is <name>\"."),
            (Idle | Ready { .. }, Command::Query(name)) => self.query(name),
            (Exploring { .. }, _) => unreachable!("handled above"),
        }
    }

    /// Explore `scene`, returning the canonical captures.
    fn run_pass(&mut self, scene: &SceneSpec, object: &str) -> Result<Vec<(usize, Capture)>, String> {
        let mut observer = self.observer.take();
        let sphere = self.sphere.clone();
        let budget = self.config.explorer.budget;
        let start = self.config.explorer.start_view.min(sphere.len() - 1);
        let mut inner = SceneEvaluator {
            scene,
            sphere: &sphere,
            camera: self.config.camera,
            segmentation: self.config.segmentation,
            gov: self.config.gov,
        };
        let frames = &mut self.frames;
        let current = &mut self.current_view;
        let progress = &mut self.state;
        let obs = &mut observer;
        let evaluator = |i: usize| -> Evaluation {
            let e = inner.evaluate(i);
            if let Some(c) = &e.capture {
                let entry = FrameEntry {
                    view: i,
                    frame: c.frame.clone(),
                    mask: c.mask.clone(),
                    detections: Vec::new(),
                };
                if let Some(o) = obs.as_mut() {
                    o(&SessionEvent::FrameCaptured(entry.clone()));
                }
                frames.insert(i, entry);
                *current = Some(i);
            }
            if let SessionState::Exploring { evaluated, .. } = progress {
                *evaluated += 1;
            }
            if let Some(o) = obs.as_mut() {
                o(&SessionEvent::ViewEvaluated {
                    view: i,
                    score: e.score,
                });
            }
            e
        };
        let state = Explorer::new(&sphere, evaluator, budget)
            .map_err(|e| e.to_string())
            .and_then(|mut ex| {
                let run = ex.run(start);
                let st = ex.into_state();
                run.map(|_| st).map_err(|e| e.to_string())
            });
        self.observer = observer;
        let state = state?;
        let canon = select_canonical(&state, self.config.explorer.canonical_k).map_err(|e| e.to_string())?;
        let views: Vec<(usize, Capture)> = canon
            .views
            .into_iter()
            .filter_map(|v| v.capture.filter(|c| c.has_object()).map(|c| (v.index, c)))
            .collect();
        if views.is_empty() {
            return Err(format!("no object found while exploring {object}"));
        }
        Ok(views)
    }

    fn training_samples(
        &mut self,
        scene: &SceneSpec,
        name: &str,
    ) -> Result<(Vec<crate::augmenter::TrainingSample>, Vec<usize>), String> {
        let views = self.run_pass(scene, name)?;
        let refs: Vec<(usize, &Capture)> = views.iter().map(|(i, c)| (*i, c)).collect();
        let seed = derive_seed(self.config.explorer.seed, self.passes);
        self.passes += 1;
        let samples = build_training_set(
            scene,
            &self.sphere,
            &refs,
            &self.config.camera,
            &self.config.segmentation,
            &self.config.augment,
            name,
            seed,
        )
        .map_err(|e| e.to_string())?;
        Ok((samples, views.iter().map(|v| v.0).collect()))
    }

    fn register(&mut self, name: String) -> Response {
        let Some(scene) = self.scene.clone() else {
            return self.reply(false, "No scene loaded: say \"load scene <path>\".");
        };
        if self.registry.knows(&name) {
            return self.reply(false, format!("{name} is already registered; choose another name."));
        }
        self.set_state(SessionState::Exploring {
            object: name.clone(),
            evaluated: 0,
        });
        let outcome = self.training_samples(&scene, &name).and_then(|(samples, views)| {
            self.registry
                .register_object(&name, &samples)
                .map(|_| (samples.len(), views))
                .map_err(|e| e.to_string())
        });
        match outcome {
            Ok((n, views)) => {
                self.set_state(SessionState::Ready {
                    open: Some(name.clone()),
                });
                self.reply(
                    true,
                    format!("Registered {name} from canonical views {views:?} with {n} training samples."),
                )
            }
            Err(e) => {
                self.set_state(SessionState::AwaitingLabel);
                self.reply(false, format!("Registration failed: {e}."))
            }
        }
    }

    fn flip(&mut self, name: String) -> Response {
        let Some(scene) = self.scene.clone() else {
            return self.reply(false, "No scene loaded.");
        };
        let flipped = scene.flipped();
        self.set_state(SessionState::Exploring {
            object: name.clone(),
            evaluated: 0,
        });
        let outcome = self.training_samples(&flipped, &name).and_then(|(samples, views)| {
            self.registry
                .append_exemplars(&name, &samples)
                .map(|total| (samples.len(), total, views))
                .map_err(|e| e.to_string())
        });
        self.set_state(SessionState::Ready {
            open: Some(name.clone()),
        });
        match outcome {
            Ok((n, total, views)) => self.reply(
                true,
                format!("Added {n} samples of flipped {name} from views {views:?}; {total} exemplars in total."),
            ),
            Err(e) => self.reply(false, format!("Flip pass failed: {e}.")),
        }
    }

    fn payload(&self, d: &Detection, view: usize, capture: &Capture) -> DetectionPayload {
        let pts: Vec<_> = d.mask.indices().filter_map(|i| capture.frame.point(i)).collect();
        let centre = if pts.is_empty() {
            let (u, v) = d.mask.centroid().unwrap_or((0.0, 0.0));
            capture.frame.intrinsics.back_project(u, v, 1.0)
        } else {
            pts.iter().sum::<crate::Vec3>() / pts.len() as f64
        };
        let world = capture.pose.camera_to_world(&centre);
        let dir = (world - capture.pose.position).normalize();
        DetectionPayload {
            label: d.label.clone(),
            bbox: d.bbox,
            score: d.score,
            view,
            pointing: [dir.x, dir.y, dir.z],
            target: [world.x, world.y, world.z],
        }
    }

    fn query(&mut self, name: String) -> Response {
        if self.registry.is_empty() {
            return self.reply(false, "no objects registered");
        }
        let Some(scene) = self.scene.clone() else {
            return self.reply(false, "No scene loaded.");
        };
        if !self.registry.knows(&name) {
            return self.reply(false, format!("I don't know the object {name}."));
        }
        let view = 0;
        let capture = capture_view(
            &scene,
            &self.sphere,
            view,
            &self.config.camera,
            &self.config.segmentation,
        )
        .expect("view 0 exists on a non-empty sphere");
        let Some(plane) = capture.plane else {
            return self.reply(false, "I cannot see the table.");
        };
        let detections = detect(&self.registry, &capture.frame, &plane, &self.config.segmentation);
        let payloads: Vec<DetectionPayload> = detections.iter().map(|d| self.payload(d, view, &capture)).collect();
        let best = detections
            .iter()
            .zip(&payloads)
            .filter(|(d, _)| d.label == name)
            .fold(None::<(&Detection, &DetectionPayload)>, |acc, x| match acc {
                Some(a) if a.0.score >= x.0.score => Some(a),
                _ => Some(x),
            })
            .map(|(_, p)| p.clone());
        let entry = FrameEntry {
            view,
            frame: capture.frame.clone(),
            mask: capture.mask.clone(),
            detections: payloads.clone(),
        };
        self.emit(SessionEvent::FrameCaptured(entry.clone()));
        self.frames.insert(view, entry);
        self.current_view = Some(view);
        self.emit(SessionEvent::Detections(payloads));
        match best {
            Some(p) => {
                let b = p.bbox;
                let text = format!(
                    "The {name} is here: box ({}, {}) to ({}, {}), score {:.3}.",
                    b.x0, b.y0, b.x1, b.y1, p.score
                );
                let r = Response {
                    ok: true,
                    text,
                    state: self.state.clone(),
                    detection: Some(p),
                    quit: false,
                };
                self.emit(SessionEvent::Reply(r.clone()));
                r
            }
            None => self.reply(true, format!("I cannot see the {name}.")),
        }
    }

    /// Rebuild a session from its log records.
    pub fn replay(records: &[LogRecord]) -> Result<Self, SessionError> {
        let mut it = records.iter();
        let mut session = match it.next() {
            None => Self::new(Config::default(), None, None)?,
            Some(LogRecord::Init {
                version,
                config,
                scene_path,
                scene,
            }) => {
                if *version != LOG_VERSION {
                    return Err(SessionError::CorruptLog {
                        line: 1,
                        message: format!("unsupported log version {version}"),
                    });
                }
                Self::new((**config).clone(), scene.clone().map(|s| *s), scene_path.clone())?
            }
            Some(_) => {
                return Err(SessionError::CorruptLog {
                    line: 1,
                    message: "log must start with an init record".into(),
                })
            }
        };
        for (k, r) in it.enumerate() {
            match r {
                LogRecord::Command { utterance } => {
                    session.handle(utterance);
                }
                LogRecord::SceneLoaded { path, scene } => {
                    session.log.push(r.clone());
                    session.install_scene(path.clone(), (**scene).clone());
                }
                LogRecord::Init { .. } => {
                    return Err(SessionError::CorruptLog {
                        line: k + 2,
                        message: "init record in the middle of the log".into(),
                    })
                }
            }
        }
        Ok(session)
    }
}

/// One log record as a single JSON line (no trailing newline).
pub fn record_to_line(r: &LogRecord) -> String {
    serde_json::to_string(r).expect("log records serialise")
}

/// Parse a JSON-lines log. A malformed final line is treated as an
/// interrupted write and dropped; malformed lines elsewhere are errors.
pub fn parse_log(text: &str) -> Result<Vec<LogRecord>, SessionError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, l) in lines.iter().enumerate() {
        if l.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LogRecord>(l) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == lines.len() && !text.ends_with('\n') => break,
            Err(e) => {
                return Err(SessionError::CorruptLog {
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}
