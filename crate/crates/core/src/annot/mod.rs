//! Projects, per-frame operator annotations and their JSON persistence.

mod frames;
pub mod json;
mod validate;

use std::collections::HashSet;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geomkit::Point2;
use crate::stabilize::ReferenceTrack;

pub use frames::{ingest_frames, parse_frame_name, FrameFile, FrameSequence};
pub use validate::{validate_annotations, Finding, Severity, ValidationReport};

use json::canonical_real;

#[derive(Debug, Error)]
pub enum AnnotError {
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("schema violation at `{path}`: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("frame directory {0} does not exist")]
    MissingFrameDir(PathBuf),
    #[error("frame {0} is missing from the sequence")]
    MissingFrame(u32),
    #[error("frame {frame} appears more than once")]
    DuplicateFrame { frame: u32 },
    #[error("frame {frame} is {got_width}×{got_height}, expected {width}×{height}")]
    DimensionMismatch { frame: u32, width: u32, height: u32, got_width: u32, got_height: u32 },
    #[error("no frame_NNNN images in {0}")]
    EmptyDirectory(PathBuf),
    #[error("cannot read image {path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl AnnotError {
    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::SchemaViolation { path: path.into(), message: message.into() }
    }

    /// True for failures of the environment rather than of the document.
    pub fn is_io(&self) -> bool {
        matches!(self, Self::Io { .. } | Self::Image { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Surveillance,
    Recorder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Vehicle,
    Pedestrian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Longitudinal,
    Lateral,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: String,
    pub kind: ObjectKind,
    pub primary_direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HitSpec {
    pub frame_index: u32,
    pub object_id: String,
}

fn default_true() -> bool {
    true
}

/// Scenario configuration. Field order is the on-disk key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Project {
    pub id: String,
    pub mode: Mode,
    pub fps: f64,
    /// Relative paths resolve against the project file's directory.
    pub frame_dir: String,
    #[serde(default)]
    pub real_reference_width_m: Option<f64>,
    #[serde(default)]
    pub real_road_width_m: Option<f64>,
    pub rectify_src_quad: [Point2; 4],
    pub rectify_dst_rect: [Point2; 4],
    #[serde(default = "default_true")]
    pub flip_y: bool,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub hit: Option<HitSpec>,
    #[serde(default)]
    pub reference_track: Option<ReferenceTrack>,
}

impl Project {
    pub fn frame_dir_path(&self, base: &Path) -> PathBuf {
        base.join(&self.frame_dir)
    }

    pub fn object(&self, id: &str) -> Option<&ObjectSpec> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Width of the rectification target rectangle in working pixels; this
    /// span corresponds to `real_road_width_m`.
    pub fn road_width_px(&self) -> f64 {
        let xs = self.rectify_dst_rect.iter().map(|p| p.x);
        let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
        let min = xs.fold(f64::INFINITY, f64::min);
        max - min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventType {
    Horn,
    Lights,
    Brake,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    #[serde(rename = "type")]
    pub kind: EventType,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mark {
    pub object_id: String,
    pub x: f64,
    pub y: f64,
}

impl Mark {
    pub fn point(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameAnnotation {
    pub frame_index: u32,
    #[serde(default)]
    pub marks: Vec<Mark>,
    #[serde(default)]
    pub ref_width_px: Option<f64>,
    #[serde(default)]
    pub events: Vec<Event>,
}

/// A project together with its annotations: the content of one project file.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectDocument {
    pub project: Project,
    pub annotations: Vec<FrameAnnotation>,
}

#[derive(Serialize)]
struct WireOut<'a> {
    #[serde(flatten)]
    project: &'a Project,
    annotations: &'a [FrameAnnotation],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireIn {
    id: String,
    mode: Mode,
    fps: f64,
    frame_dir: String,
    #[serde(default)]
    real_reference_width_m: Option<f64>,
    #[serde(default)]
    real_road_width_m: Option<f64>,
    rectify_src_quad: [Point2; 4],
    rectify_dst_rect: [Point2; 4],
    #[serde(default = "default_true")]
    flip_y: bool,
    #[serde(default)]
    objects: Vec<ObjectSpec>,
    #[serde(default)]
    hit: Option<HitSpec>,
    #[serde(default)]
    reference_track: Option<ReferenceTrack>,
    #[serde(default)]
    annotations: Vec<FrameAnnotation>,
}

impl From<WireIn> for ProjectDocument {
    fn from(w: WireIn) -> Self {
        ProjectDocument {
            project: Project {
                id: w.id,
                mode: w.mode,
                fps: w.fps,
                frame_dir: w.frame_dir,
                real_reference_width_m: w.real_reference_width_m,
                real_road_width_m: w.real_road_width_m,
                rectify_src_quad: w.rectify_src_quad,
                rectify_dst_rect: w.rectify_dst_rect,
                flip_y: w.flip_y,
                objects: w.objects,
                hit: w.hit,
                reference_track: w.reference_track,
            },
            annotations: w.annotations,
        }
    }
}

fn classify(path: &str, err: serde_path_to_error::Error<serde_json::Error>) -> AnnotError {
    let at = err.path().to_string();
    let inner = err.into_inner();
    match inner.classify() {
        serde_json::error::Category::Data => AnnotError::schema(at, inner.to_string()),
        _ => AnnotError::Parse { path: path.into(), message: inner.to_string() },
    }
}

fn canonical_point(p: &mut Point2) {
    p.x = canonical_real(p.x);
    p.y = canonical_real(p.y);
}

fn canonical_annotations(annotations: &mut [FrameAnnotation]) {
    for a in annotations {
        a.ref_width_px = a.ref_width_px.map(canonical_real);
        for m in &mut a.marks {
            m.x = canonical_real(m.x);
            m.y = canonical_real(m.y);
        }
    }
}

impl ProjectDocument {
    /// Parses and checks a document. `origin` names the source in error messages.
    pub fn from_json(bytes: &[u8], origin: &str) -> Result<Self, AnnotError> {
        let de = &mut serde_json::Deserializer::from_slice(bytes);
        let wire: WireIn = serde_path_to_error::deserialize(de).map_err(|e| classify(origin, e))?;
        let mut doc = ProjectDocument::from(wire);
        doc.canonicalize();
        doc.check_schema()?;
        Ok(doc)
    }

    /// Deterministic serialization; the inverse of [`ProjectDocument::from_json`].
    pub fn to_json(&self) -> Result<Vec<u8>, AnnotError> {
        json::to_canonical_vec(&WireOut { project: &self.project, annotations: &self.annotations })
            .map_err(|e| AnnotError::schema("", e.to_string()))
    }

    /// Rounds every real to the precision it keeps on disk, so that a
    /// save/load cycle reproduces the document exactly.
    pub fn canonicalize(&mut self) {
        let p = &mut self.project;
        p.fps = canonical_real(p.fps);
        p.real_reference_width_m = p.real_reference_width_m.map(canonical_real);
        p.real_road_width_m = p.real_road_width_m.map(canonical_real);
        p.rectify_src_quad.iter_mut().for_each(canonical_point);
        p.rectify_dst_rect.iter_mut().for_each(canonical_point);
        if let Some(rt) = &mut p.reference_track {
            rt.target_points.iter_mut().for_each(canonical_point);
            for pts in rt.per_frame_points.values_mut() {
                pts.iter_mut().for_each(canonical_point);
            }
        }
        canonical_annotations(&mut self.annotations);
        self.annotations.sort_by_key(|a| a.frame_index);
    }

    /// Structural checks beyond what the JSON types enforce. Quad degeneracy
    /// is deliberately left to [`validate_annotations`] so that such projects
    /// still load and can be repaired.
    pub fn check_schema(&self) -> Result<(), AnnotError> {
        let p = &self.project;
        if p.id.is_empty() {
            return Err(AnnotError::schema("id", "must not be empty"));
        }
        if !(p.fps > 0.0 && p.fps.is_finite()) {
            return Err(AnnotError::schema("fps", "must be a positive number"));
        }
        for (name, v) in [("real_reference_width_m", p.real_reference_width_m), ("real_road_width_m", p.real_road_width_m)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(AnnotError::schema(name, "must be positive when present"));
                }
            }
        }
        for (name, quad) in [("rectify_src_quad", &p.rectify_src_quad), ("rectify_dst_rect", &p.rectify_dst_rect)] {
            if let Some(k) = quad.iter().position(|q| !q.is_finite()) {
                return Err(AnnotError::schema(format!("{name}[{k}]"), "must be finite"));
            }
        }
        let mut ids = HashSet::new();
        for (k, o) in p.objects.iter().enumerate() {
            if o.id.is_empty() {
                return Err(AnnotError::schema(format!("objects[{k}].id"), "must not be empty"));
            }
            if !ids.insert(o.id.as_str()) {
                return Err(AnnotError::schema(format!("objects[{k}].id"), format!("duplicate object id {:?}", o.id)));
            }
        }
        match (&p.mode, &p.reference_track) {
            (Mode::Recorder, None) => {
                return Err(AnnotError::schema("reference_track", "required in recorder mode"));
            }
            (_, Some(rt)) => {
                if !rt.per_frame_points.contains_key(&rt.target_frame) {
                    return Err(AnnotError::schema(
                        "reference_track.per_frame_points",
                        format!("missing entry for target frame {}", rt.target_frame),
                    ));
                }
                if rt.per_frame_points[&rt.target_frame] != rt.target_points {
                    return Err(AnnotError::schema(
                        "reference_track.target_points",
                        "must equal the target frame's per-frame points",
                    ));
                }
                for (f, pts) in &rt.per_frame_points {
                    if pts.iter().any(|q| !q.is_finite()) {
                        return Err(AnnotError::schema(format!("reference_track.per_frame_points.{f}"), "must be finite"));
                    }
                }
            }
            _ => {}
        }
        check_annotations(&self.annotations)
    }
}

/// Per-annotation structural checks shared by project loading and annotation writes.
pub fn check_annotations(annotations: &[FrameAnnotation]) -> Result<(), AnnotError> {
    let mut frames = HashSet::new();
    for (k, a) in annotations.iter().enumerate() {
        if a.frame_index < 1 {
            return Err(AnnotError::schema(format!("annotations[{k}].frame_index"), "frames are numbered from 1"));
        }
        if !frames.insert(a.frame_index) {
            return Err(AnnotError::schema(
                format!("annotations[{k}].frame_index"),
                format!("duplicate annotation for frame {}", a.frame_index),
            ));
        }
        if let Some(w) = a.ref_width_px {
            if !(w > 0.0 && w.is_finite()) {
                return Err(AnnotError::schema(format!("annotations[{k}].ref_width_px"), "must be positive when present"));
            }
        }
        let mut marked = HashSet::new();
        for (j, m) in a.marks.iter().enumerate() {
            if !(m.x.is_finite() && m.y.is_finite()) {
                return Err(AnnotError::schema(format!("annotations[{k}].marks[{j}]"), "coordinates must be finite"));
            }
            if !marked.insert(m.object_id.as_str()) {
                return Err(AnnotError::schema(
                    format!("annotations[{k}].marks[{j}].object_id"),
                    format!("object {:?} marked twice in frame {}", m.object_id, a.frame_index),
                ));
            }
        }
    }
    Ok(())
}

/// Parses a bare annotations array (the body of an annotation write).
pub fn parse_annotations(bytes: &[u8]) -> Result<Vec<FrameAnnotation>, AnnotError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let mut annotations: Vec<FrameAnnotation> =
        serde_path_to_error::deserialize(de).map_err(|e| match classify("request body", e) {
            AnnotError::SchemaViolation { path, message } => {
                AnnotError::SchemaViolation { path: format!("annotations{}", strip_dot(&path)), message }
            }
            other => other,
        })?;
    canonical_annotations(&mut annotations);
    annotations.sort_by_key(|a| a.frame_index);
    check_annotations(&annotations)?;
    Ok(annotations)
}

fn strip_dot(path: &str) -> String {
    match path {
        "." => String::new(),
        p if p.starts_with('[') => p.to_string(),
        p => format!(".{p}"),
    }
}

/// Canonical serialization of an annotations array.
pub fn annotations_to_json(annotations: &[FrameAnnotation]) -> Vec<u8> {
    json::to_canonical_vec(annotations).expect("annotation reals are finite after checks")
}

/// Reads and validates a project file.
pub fn load_project(path: &Path) -> Result<ProjectDocument, AnnotError> {
    let bytes = std::fs::read(path).map_err(|source| AnnotError::Io { path: path.into(), source })?;
    let doc = ProjectDocument::from_json(&bytes, &path.display().to_string())?;
    let dir = doc.project.frame_dir_path(path.parent().unwrap_or(Path::new(".")));
    if !dir.is_dir() {
        return Err(AnnotError::MissingFrameDir(dir));
    }
    Ok(doc)
}

/// Writes the document atomically (temporary file, then rename).
pub fn save_project(doc: &ProjectDocument, path: &Path) -> Result<(), AnnotError> {
    let bytes = doc.to_json()?;
    let io = |source| AnnotError::Io { path: path.into(), source };
    let file_name = path.file_name().ok_or_else(|| io(std::io::Error::other("path has no file name")))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    let write = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()
    };
    write().map_err(io)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        io(e)
    })
}
