//! Interactive sessions: load a cloud, sketch, retrieve, align, redraw, export.
//!
//! ```text
//! EMPTY --load_cloud--> CLOUD_LOADED --submit_sketch--> RETRIEVED
//! EMPTY --submit_sketch--> RETRIEVED                     (sketch only)
//! RETRIEVED --select_and_align--> ALIGNED --extract_contour--> CONTOUR_READY
//! CONTOUR_READY --submit_sketch--> RETRIEVED
//! ALIGNED | CONTOUR_READY --export--> EXPORTED
//! ```

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use base64::Engine as _;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use sketchloop_core::contour::{extract_model_contour, sketch_from_png, ContourParams};
use sketchloop_core::geometry::{
    load_mesh, normalize_unit, parse_pointcloud, write_mesh_obj, CloudFormat, Normalization, PointCloud,
    TriangleMesh, Vec3, Viewpoint,
};
use sketchloop_core::icp::{icp, model_points_for_icp, IcpParams, IcpResult};
use sketchloop_core::raster::{BinaryImage, SketchImage};
use sketchloop_core::render::{project_points, rasterize_silhouette, rasterize_with_fit, ViewFit, DEFAULT_MARGIN};
use sketchloop_core::retrieval::{ModelRecord, RetrievalError, RetrievalHit, SearchIndex};

use crate::journal::{Journal, JournalEntry, JournalOp};

pub const DEFAULT_CANVAS: usize = 512;
pub const DEFAULT_TOPK: usize = 10;
pub const MIN_CANVAS: usize = sketchloop_core::render::MIN_RENDER_SIZE;
pub const MAX_CANVAS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SessionState {
    Empty,
    CloudLoaded,
    Retrieved,
    Aligned,
    ContourReady,
    /// Terminal.
    Exported,
}

impl SessionState {
    pub const ALL: [SessionState; 6] = [
        SessionState::Empty,
        SessionState::CloudLoaded,
        SessionState::Retrieved,
        SessionState::Aligned,
        SessionState::ContourReady,
        SessionState::Exported,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SessionState::Empty => "EMPTY",
            SessionState::CloudLoaded => "CLOUD_LOADED",
            SessionState::Retrieved => "RETRIEVED",
            SessionState::Aligned => "ALIGNED",
            SessionState::ContourReady => "CONTOUR_READY",
            SessionState::Exported => "EXPORTED",
        }
    }

    /// Whether a mutating `action` is legal here.
    pub fn allows(self, action: Action) -> bool {
        use SessionState::*;
        match action {
            Action::Create => false,
            Action::LoadCloud => self == Empty,
            Action::SubmitSketch => matches!(self, Empty | CloudLoaded | ContourReady),
            Action::SelectAndAlign => self == Retrieved,
            Action::ExtractContour => self == Aligned,
            Action::Export => matches!(self, Aligned | ContourReady),
        }
    }

    /// State after `action` succeeds.
    fn after(self, action: Action) -> SessionState {
        match action {
            Action::Create => SessionState::Empty,
            Action::LoadCloud => SessionState::CloudLoaded,
            Action::SubmitSketch => SessionState::Retrieved,
            Action::SelectAndAlign => SessionState::Aligned,
            Action::ExtractContour => SessionState::ContourReady,
            Action::Export => SessionState::Exported,
        }
    }
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Mutating calls; each successful one appends a history entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Create,
    LoadCloud,
    SubmitSketch,
    SelectAndAlign,
    ExtractContour,
    Export,
}

impl Action {
    pub const ALL: [Action; 6] = [
        Action::Create,
        Action::LoadCloud,
        Action::SubmitSketch,
        Action::SelectAndAlign,
        Action::ExtractContour,
        Action::Export,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Action::Create => "create",
            Action::LoadCloud => "load_cloud",
            Action::SubmitSketch => "submit_sketch",
            Action::SelectAndAlign => "select_and_align",
            Action::ExtractContour => "extract_contour",
            Action::Export => "export",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    NotFound(String),
    #[error("cannot {action} in state {state}")]
    StateConflict { state: SessionState, action: String },
    #[error("{0}")]
    Internal(String),
}

impl SessionError {
    pub fn kind(&self) -> &'static str {
        match self {
            SessionError::Validation(_) => "validation",
            SessionError::NotFound(_) => "not_found",
            SessionError::StateConflict { .. } => "state_conflict",
            SessionError::Internal(_) => "internal",
        }
    }

    fn conflict(state: SessionState, action: impl fmt::Display) -> SessionError {
        SessionError::StateConflict {
            state,
            action: action.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub sketch_count: u32,
    pub retrieval_count: u32,
    pub last_similarity: Option<f64>,
    pub last_icp_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub step: usize,
    pub action: Action,
    pub timestamp_ms: u64,
    pub metrics: SessionMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitDoc {
    pub model_id: u32,
    pub best_view: u32,
    pub similarity: f64,
    pub name: String,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentDoc {
    /// Row-major.
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
    pub prescale: f64,
    pub pivot: [f64; 3],
    pub error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
    /// Fixed-order text form of the same result.
    pub record: String,
}

impl From<&IcpResult> for AlignmentDoc {
    fn from(r: &IcpResult) -> Self {
        let m = &r.transform.rotation;
        let t = &r.transform.translation;
        AlignmentDoc {
            rotation: [0, 1, 2].map(|i| [m[(i, 0)], m[(i, 1)], m[(i, 2)]]),
            translation: [t.x, t.y, t.z],
            prescale: r.prescale,
            pivot: [r.pivot.x, r.pivot.y, r.pivot.z],
            error: r.error,
            iterations: r.iterations,
            converged: r.converged,
            history: r.history.clone(),
            record: r.to_record(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDoc {
    pub id: String,
    pub state: SessionState,
    pub canvas_w: usize,
    pub canvas_h: usize,
    pub seed: u64,
    pub cloud_points: Option<usize>,
    pub has_sketch: bool,
    pub hits: Vec<HitDoc>,
    pub selected_model: Option<u32>,
    pub alignment: Option<AlignmentDoc>,
    pub alignment_error: Option<String>,
    pub metrics: SessionMetrics,
    pub history: Vec<HistoryEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitsDoc {
    pub state: SessionState,
    pub hits: Vec<HitDoc>,
    pub metrics: SessionMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignDoc {
    pub state: SessionState,
    pub model_id: u32,
    /// Absent when the session has no cloud or ICP could not run.
    pub alignment: Option<AlignmentDoc>,
    pub alignment_error: Option<String>,
    pub metrics: SessionMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewDoc {
    pub width: usize,
    pub height: usize,
    pub direction: [f64; 3],
    /// Continuous pixel coordinates, origin top-left, y down.
    pub points: Vec<[f64; 2]>,
    pub png_base64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportDoc {
    pub state: SessionState,
    pub model_id: u32,
    pub vertex_count: usize,
    pub face_count: usize,
    pub obj: String,
    pub metrics: SessionMetrics,
    pub alignment: Option<AlignmentDoc>,
}

/// Result of one replayed journal entry.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Session(SessionDoc),
    Hits(HitsDoc),
    Align(AlignDoc),
    Contour(Vec<u8>),
    Export(ExportDoc),
}

struct LoadedCloud {
    /// Unit-normalized.
    cloud: PointCloud,
    normalization: Normalization,
}

struct Session {
    id: String,
    state: SessionState,
    canvas_w: usize,
    canvas_h: usize,
    seed: u64,
    cloud: Option<LoadedCloud>,
    sketch: Option<SketchImage>,
    hits: Vec<RetrievalHit>,
    selected: Option<u32>,
    alignment: Option<IcpResult>,
    alignment_error: Option<String>,
    /// Selected model in the normalized cloud frame.
    aligned_mesh: Option<TriangleMesh>,
    metrics: SessionMetrics,
    history: Vec<HistoryEntry>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

pub fn parse_direction(text: &str) -> Result<Vec3, SessionError> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| SessionError::Validation(format!("direction {text:?} is not three comma-separated numbers")))?;
    match parts[..] {
        [x, y, z] => Ok(Vec3::new(x, y, z)),
        _ => Err(SessionError::Validation(format!(
            "direction {text:?} is not three comma-separated numbers"
        ))),
    }
}

fn viewpoint(direction: Vec3) -> Result<Viewpoint, SessionError> {
    Viewpoint::from_direction(0, direction)
        .ok_or_else(|| SessionError::Validation("direction must be a finite non-zero vector".into()))
}

fn check_canvas(w: usize, h: usize) -> Result<(), SessionError> {
    let ok = |v: usize| (MIN_CANVAS..=MAX_CANVAS).contains(&v);
    if !ok(w) || !ok(h) {
        return Err(SessionError::Validation(format!(
            "canvas {w}x{h} outside {MIN_CANVAS}..={MAX_CANVAS} pixels per side"
        )));
    }
    Ok(())
}

fn b64(bytes: &[u8]) -> String {
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

fn unb64(text: &str) -> Result<Vec<u8>, SessionError> {
    base64::engine::general_purpose::STANDARD
        .decode(text)
        .map_err(|e| SessionError::Validation(format!("bad base64 body: {e}")))
}

fn dots(points: &[(f64, f64)], w: usize, h: usize) -> Result<BinaryImage, SessionError> {
    let mut img = BinaryImage::new(w, h).map_err(|e| SessionError::Internal(e.to_string()))?;
    for &(x, y) in points {
        let (cx, cy) = (x.floor() as i64, y.floor() as i64);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (px, py) = (cx + dx, cy + dy);
                if px >= 0 && py >= 0 && (px as usize) < w && (py as usize) < h {
                    img.set(px as usize, py as usize, true);
                }
            }
        }
    }
    Ok(img)
}

/// Shared retrieval index plus every live session.
pub struct Workbench {
    index: Arc<SearchIndex>,
    meshes: Mutex<HashMap<u32, Arc<TriangleMesh>>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    journal: Option<Journal>,
    ids: Mutex<ChaCha8Rng>,
    contour: ContourParams,
}

impl Workbench {
    pub fn new(index: SearchIndex) -> Workbench {
        Workbench {
            index: Arc::new(index),
            meshes: Mutex::new(HashMap::new()),
            sessions: RwLock::new(HashMap::new()),
            journal: None,
            ids: Mutex::new(ChaCha8Rng::from_os_rng()),
            contour: ContourParams::default(),
        }
    }

    /// Journals every successful mutating call under `dir`, after restoring
    /// the sessions already journaled there.
    pub fn with_journal(mut self, dir: &Path) -> Result<Workbench, SessionError> {
        let journal = Journal::open(dir).map_err(|e| SessionError::Internal(e.to_string()))?;
        for entries in journal.read_all().map_err(|e| SessionError::Internal(e.to_string()))? {
            for entry in &entries {
                if let Err(e) = self.apply(entry) {
                    log::warn!("journal replay of session {} stopped: {e}", entry.session);
                    break;
                }
            }
        }
        self.journal = Some(journal);
        Ok(self)
    }

    pub fn index(&self) -> &SearchIndex {
        &self.index
    }

    pub fn models(&self) -> &[ModelRecord] {
        &self.index.models
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().expect("session map").len()
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, SessionError> {
        self.sessions
            .read()
            .expect("session map")
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::NotFound(format!("session {id:?} not found")))
    }

    fn record(&self, s: &mut Session, action: Action, op: Option<JournalOp>) {
        s.state = s.state.after(action);
        s.history.push(HistoryEntry {
            step: s.history.len(),
            action,
            timestamp_ms: now_ms(),
            metrics: s.metrics,
        });
        if let (Some(journal), Some(op)) = (&self.journal, op) {
            let entry = JournalEntry {
                session: s.id.clone(),
                op,
            };
            if let Err(e) = journal.append(&entry) {
                log::error!("journal write for session {} failed: {e}", s.id);
            }
        }
    }

    /// Runs `f` on the locked session when `action` is legal in its state.
    fn mutate<T>(
        &self,
        id: &str,
        action: Action,
        f: impl FnOnce(&Workbench, &mut Session) -> Result<(T, JournalOp), SessionError>,
    ) -> Result<T, SessionError> {
        self.mutate_then(id, action, f, |_, _, out| out)
    }

    /// [`Workbench::mutate`], then `finish` on the session as recorded.
    fn mutate_then<R, T>(
        &self,
        id: &str,
        action: Action,
        f: impl FnOnce(&Workbench, &mut Session) -> Result<(R, JournalOp), SessionError>,
        finish: impl FnOnce(&Workbench, &Session, R) -> T,
    ) -> Result<T, SessionError> {
        let session = self.session(id)?;
        let mut s = session.lock().expect("session lock");
        if !s.state.allows(action) {
            return Err(SessionError::conflict(s.state, action));
        }
        let (out, op) = f(self, &mut s)?;
        self.record(&mut s, action, Some(op));
        Ok(finish(self, &s, out))
    }

    pub fn create_session(&self, canvas_w: usize, canvas_h: usize, seed: u64) -> Result<SessionDoc, SessionError> {
        let id = {
            let mut rng = self.ids.lock().expect("id generator");
            loop {
                let id = format!("{:016x}", rng.random::<u64>());
                if !self.sessions.read().expect("session map").contains_key(&id) {
                    break id;
                }
            }
        };
        self.create_with_id(id, canvas_w, canvas_h, seed, true)
    }

    fn create_with_id(
        &self,
        id: String,
        canvas_w: usize,
        canvas_h: usize,
        seed: u64,
        journal: bool,
    ) -> Result<SessionDoc, SessionError> {
        check_canvas(canvas_w, canvas_h)?;
        let mut s = Session {
            id: id.clone(),
            state: SessionState::Empty,
            canvas_w,
            canvas_h,
            seed,
            cloud: None,
            sketch: None,
            hits: Vec::new(),
            selected: None,
            alignment: None,
            alignment_error: None,
            aligned_mesh: None,
            metrics: SessionMetrics::default(),
            history: Vec::new(),
        };
        let op = journal.then_some(JournalOp::Create {
            canvas_w,
            canvas_h,
            seed,
        });
        let mut map = self.sessions.write().expect("session map");
        if map.contains_key(&id) {
            return Err(SessionError::Validation(format!("session {id:?} already exists")));
        }
        self.record(&mut s, Action::Create, op);
        let doc = self.doc(&s);
        map.insert(id, Arc::new(Mutex::new(s)));
        Ok(doc)
    }

    pub fn get_session(&self, id: &str) -> Result<SessionDoc, SessionError> {
        let session = self.session(id)?;
        let s = session.lock().expect("session lock");
        Ok(self.doc(&s))
    }

    /// Parses and normalizes a cloud; `format` is sniffed when absent.
    pub fn load_cloud(&self, id: &str, body: &[u8], format: Option<&str>) -> Result<SessionDoc, SessionError> {
        let fmt = match format {
            Some(f) => f.parse::<CloudFormat>().map_err(|e| SessionError::Validation(e.to_string()))?,
            None => CloudFormat::sniff(body),
        };
        self.mutate_then(id, Action::LoadCloud, |_, s| {
            let raw = parse_pointcloud(body, fmt).map_err(|e| SessionError::Validation(e.to_string()))?;
            let (points, normalization) =
                normalize_unit(&raw.points).map_err(|e| SessionError::Validation(e.to_string()))?;
            s.cloud = Some(LoadedCloud {
                cloud: PointCloud::new(points),
                normalization,
            });
            let op = JournalOp::LoadCloud {
                format: format.map(str::to_string),
                body: b64(body),
            };
            Ok(((), op))
        }, |bench, s, ()| bench.doc(s))
    }

    /// Cloud projected along `direction`; `size` defaults to the canvas.
    pub fn get_view(&self, id: &str, direction: Vec3, size: Option<(usize, usize)>) -> Result<ViewDoc, SessionError> {
        let session = self.session(id)?;
        let s = session.lock().expect("session lock");
        let view = viewpoint(direction)?;
        let (w, h) = size.unwrap_or((s.canvas_w, s.canvas_h));
        check_canvas(w, h)?;
        let Some(loaded) = &s.cloud else {
            return Err(SessionError::conflict(s.state, "get_view without a point cloud"));
        };
        let points = project_points(&loaded.cloud, &view, w, h, DEFAULT_MARGIN)
            .map_err(|e| SessionError::Validation(e.to_string()))?;
        let png = dots(&points, w, h)?.to_png().map_err(|e| SessionError::Internal(e.to_string()))?;
        Ok(ViewDoc {
            width: w,
            height: h,
            direction: [view.direction.x, view.direction.y, view.direction.z],
            points: points.iter().map(|&(x, y)| [x, y]).collect(),
            png_base64: b64(&png),
        })
    }

    pub fn submit_sketch(&self, id: &str, png: &[u8], topk: usize) -> Result<HitsDoc, SessionError> {
        if topk == 0 {
            return Err(SessionError::Validation("topk must be at least 1".into()));
        }
        self.mutate(id, Action::SubmitSketch, |bench, s| {
            let sketch = sketch_from_png(png, bench.contour.threshold)
                .map_err(|e| SessionError::Validation(format!("sketch is not a readable PNG: {e}")))?;
            if (sketch.width(), sketch.height()) != (s.canvas_w, s.canvas_h) {
                return Err(SessionError::Validation(format!(
                    "sketch is {}x{}, canvas is {}x{}",
                    sketch.width(),
                    sketch.height(),
                    s.canvas_w,
                    s.canvas_h
                )));
            }
            let hits = bench.index.query(&sketch, topk).map_err(|e| match e {
                RetrievalError::BlankSketch | RetrievalError::NoDescriptors => {
                    SessionError::Validation(format!("sketch rejected: {e}"))
                }
                other => SessionError::Internal(other.to_string()),
            })?;
            s.metrics.sketch_count += 1;
            s.metrics.retrieval_count += 1;
            s.metrics.last_similarity = hits.first().map(|h| h.similarity);
            s.sketch = Some(sketch);
            s.hits = hits;
            let doc = HitsDoc {
                state: SessionState::Retrieved,
                hits: bench.hit_docs(&s.hits),
                metrics: s.metrics,
            };
            Ok((
                doc,
                JournalOp::SubmitSketch {
                    topk,
                    png: b64(png),
                },
            ))
        })
    }

    fn model_mesh(&self, model_id: u32) -> Result<Arc<TriangleMesh>, SessionError> {
        if let Some(m) = self.meshes.lock().expect("mesh cache").get(&model_id) {
            return Ok(m.clone());
        }
        let record = self
            .index
            .model(model_id)
            .ok_or_else(|| SessionError::NotFound(format!("model {model_id} not found")))?;
        let mesh = load_mesh(Path::new(&record.mesh_path))
            .and_then(|m| m.normalized())
            .map_err(|e| SessionError::Internal(format!("model {model_id} ({}): {e}", record.mesh_path)))?
            .0;
        let mesh = Arc::new(mesh);
        self.meshes.lock().expect("mesh cache").insert(model_id, mesh.clone());
        Ok(mesh)
    }

    /// Picks a hit and, when a cloud is loaded, fits it to the cloud by ICP.
    ///
    /// ICP failures are reported in the document, not as errors.
    pub fn select_and_align(&self, id: &str, model_id: u32) -> Result<AlignDoc, SessionError> {
        self.mutate(id, Action::SelectAndAlign, |bench, s| {
            if bench.index.model(model_id).is_none() {
                return Err(SessionError::NotFound(format!("model {model_id} not found")));
            }
            if !s.hits.iter().any(|h| h.model_id == model_id) {
                return Err(SessionError::Validation(format!(
                    "model {model_id} is not among the current hits"
                )));
            }
            let mesh = bench.model_mesh(model_id)?;
            let (alignment, error, aligned) = match &s.cloud {
                None => (None, None, (*mesh).clone()),
                Some(loaded) => match align_mesh(&mesh, &loaded.cloud, s.seed) {
                    Ok((result, aligned)) => (Some(result), None, aligned),
                    Err(e) => (None, Some(e), (*mesh).clone()),
                },
            };
            s.selected = Some(model_id);
            s.metrics.last_icp_error = alignment.as_ref().map(|r| r.error);
            s.alignment = alignment;
            s.alignment_error = error;
            s.aligned_mesh = Some(aligned);
            let doc = AlignDoc {
                state: SessionState::Aligned,
                model_id,
                alignment: s.alignment.as_ref().map(AlignmentDoc::from),
                alignment_error: s.alignment_error.clone(),
                metrics: s.metrics,
            };
            Ok((doc, JournalOp::SelectAndAlign { model_id }))
        })
    }

    /// Contour sketch of the aligned model seen along `direction`, as PNG.
    ///
    /// With a cloud loaded the image uses the same framing as [`Workbench::get_view`],
    /// so the contour lands on the projected points.
    pub fn extract_contour(&self, id: &str, direction: Vec3) -> Result<Vec<u8>, SessionError> {
        let view = viewpoint(direction)?;
        self.mutate(id, Action::ExtractContour, |bench, s| {
            let mesh = s.aligned_mesh.as_ref().expect("ALIGNED implies a selected mesh");
            let (w, h) = (s.canvas_w, s.canvas_h);
            let silhouette = match &s.cloud {
                Some(loaded) => ViewFit::fit(&loaded.cloud.points, &view, w, h, DEFAULT_MARGIN)
                    .and_then(|fit| rasterize_with_fit(mesh, &fit)),
                None => rasterize_silhouette(mesh, &view, w, h, DEFAULT_MARGIN),
            }
            .map_err(|e| SessionError::Internal(e.to_string()))?;
            let sketch = extract_model_contour(&silhouette.to_gray().to_rgb(), w, h, &bench.contour)
                .map_err(|e| SessionError::Internal(e.to_string()))?;
            let png = sketch.to_png().map_err(|e| SessionError::Internal(e.to_string()))?;
            s.sketch = Some(sketch);
            let d = view.direction;
            Ok((
                png,
                JournalOp::ExtractContour {
                    direction: [d.x, d.y, d.z],
                },
            ))
        })
    }

    /// Final aligned model as OBJ, in the coordinates of the cloud as loaded.
    pub fn export_model(&self, id: &str) -> Result<ExportDoc, SessionError> {
        self.mutate(id, Action::Export, |_, s| {
            let mesh = s.aligned_mesh.as_ref().expect("ALIGNED implies a selected mesh");
            let mesh = match &s.cloud {
                Some(loaded) => mesh.map_vertices(|p| loaded.normalization.invert(p)),
                None => mesh.clone(),
            };
            let obj = String::from_utf8(write_mesh_obj(&mesh)).expect("OBJ writer emits ASCII");
            let doc = ExportDoc {
                state: SessionState::Exported,
                model_id: s.selected.expect("ALIGNED implies a selection"),
                vertex_count: mesh.vertices.len(),
                face_count: mesh.faces.len(),
                obj,
                metrics: s.metrics,
                alignment: s.alignment.as_ref().map(AlignmentDoc::from),
            };
            Ok((doc, JournalOp::Export))
        })
    }

    /// Re-executes one journal entry. `create` reuses the recorded session id.
    pub fn apply(&self, entry: &JournalEntry) -> Result<Outcome, SessionError> {
        let id = entry.session.as_str();
        match &entry.op {
            JournalOp::Create {
                canvas_w,
                canvas_h,
                seed,
            } => {
                let journal = self.journal.is_some();
                self.create_with_id(id.to_string(), *canvas_w, *canvas_h, *seed, journal)
                    .map(Outcome::Session)
            }
            JournalOp::LoadCloud { format, body } => self
                .load_cloud(id, &unb64(body)?, format.as_deref())
                .map(Outcome::Session),
            JournalOp::SubmitSketch { topk, png } => self.submit_sketch(id, &unb64(png)?, *topk).map(Outcome::Hits),
            JournalOp::SelectAndAlign { model_id } => self.select_and_align(id, *model_id).map(Outcome::Align),
            JournalOp::ExtractContour { direction } => self
                .extract_contour(id, Vec3::new(direction[0], direction[1], direction[2]))
                .map(Outcome::Contour),
            JournalOp::Export => self.export_model(id).map(Outcome::Export),
        }
    }

    fn hit_docs(&self, hits: &[RetrievalHit]) -> Vec<HitDoc> {
        hits.iter()
            .map(|h| {
                let record = self.index.model(h.model_id);
                HitDoc {
                    model_id: h.model_id,
                    best_view: h.best_view,
                    similarity: h.similarity,
                    name: record.map(|r| r.name.clone()).unwrap_or_default(),
                    category: record.map(|r| r.category.clone()).unwrap_or_default(),
                }
            })
            .collect()
    }

    fn doc(&self, s: &Session) -> SessionDoc {
        SessionDoc {
            id: s.id.clone(),
            state: s.state,
            canvas_w: s.canvas_w,
            canvas_h: s.canvas_h,
            seed: s.seed,
            cloud_points: s.cloud.as_ref().map(|c| c.cloud.len()),
            has_sketch: s.sketch.is_some(),
            hits: self.hit_docs(&s.hits),
            selected_model: s.selected,
            alignment: s.alignment.as_ref().map(AlignmentDoc::from),
            alignment_error: s.alignment_error.clone(),
            metrics: s.metrics,
            history: s.history.clone(),
        }
    }
}

/// ICP of a unit-normalized mesh against a unit-normalized cloud; returns the
/// result and the mesh mapped into the cloud frame.
pub fn align_mesh(mesh: &TriangleMesh, cloud: &PointCloud, seed: u64) -> Result<(IcpResult, TriangleMesh), String> {
    let model_pts = model_points_for_icp(mesh, seed).map_err(|e| e.to_string())?;
    let params = IcpParams {
        seed,
        ..IcpParams::default()
    };
    let result = icp(&model_pts, cloud, &params).map_err(|e| e.to_string())?;
    let aligned = mesh.map_vertices(|p| result.model_to_cloud(p));
    Ok((result, aligned))
}
