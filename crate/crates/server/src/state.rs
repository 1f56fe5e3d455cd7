use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::http::StatusCode;
use tokio::sync::RwLock;
use trajex_core::annot::{ingest_frames, load_project, AnnotError, FrameSequence, ProjectDocument};

use crate::error::ApiError;

const PREVIEW_CACHE_LIMIT: usize = 64;

/// A loaded project with the revision clients must quote when writing.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub doc: ProjectDocument,
    pub sequence: FrameSequence,
    pub revision: u64,
}

#[derive(Debug)]
pub struct ProjectSlot {
    pub path: PathBuf,
    /// Readers share; a writer holds the lock across validation, save and swap.
    pub state: RwLock<Loaded>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PreviewKey {
    pub project: String,
    pub revision: u64,
    pub frame: u32,
    pub geometry: u64,
}

/// Projects are `<id>.json` files in one directory, loaded on first use.
#[derive(Debug)]
pub struct AppState {
    dir: PathBuf,
    projects: Mutex<HashMap<String, Arc<ProjectSlot>>>,
    previews: Mutex<HashMap<PreviewKey, Bytes>>,
}

pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && !id.starts_with('.') && id.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.'))
}

/// Frame directory of a project file, resolved against the file's directory.
pub fn frame_dir(project_path: &Path, doc: &ProjectDocument) -> PathBuf {
    doc.project.frame_dir_path(project_path.parent().unwrap_or(Path::new(".")))
}

pub fn load_blocking(path: &Path) -> Result<(ProjectDocument, FrameSequence), AnnotError> {
    let doc = load_project(path)?;
    let sequence = ingest_frames(&frame_dir(path, &doc))?;
    Ok((doc, sequence))
}

pub async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)
}

impl AppState {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into(), projects: Mutex::default(), previews: Mutex::default() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_of(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    pub fn cached(&self, id: &str) -> Option<Arc<ProjectSlot>> {
        self.projects.lock().unwrap().get(id).cloned()
    }

    /// Loaded project `id`; load failures are not cached so a fixed file is picked up.
    pub async fn project(&self, id: &str) -> Result<Arc<ProjectSlot>, ApiError> {
        if let Some(slot) = self.cached(id) {
            return Ok(slot);
        }
        let path = self.path_of(id);
        if !valid_id(id) || !path.is_file() {
            return Err(ApiError::not_found(format!("no project `{id}`")));
        }
        let load_path = path.clone();
        let (doc, sequence) = blocking(move || load_blocking(&load_path)).await?.map_err(|e| match e {
            AnnotError::Io { .. } => ApiError::internal(e),
            other => ApiError::new(StatusCode::CONFLICT, "project unavailable").with("message", other.to_string()),
        })?;
        let slot = Arc::new(ProjectSlot { path, state: RwLock::new(Loaded { doc, sequence, revision: 1 }) });
        // A concurrent first load may have won; keep that one.
        Ok(self.projects.lock().unwrap().entry(id.to_string()).or_insert(slot).clone())
    }

    pub fn preview(&self, key: &PreviewKey) -> Option<Bytes> {
        self.previews.lock().unwrap().get(key).cloned()
    }

    pub fn store_preview(&self, key: PreviewKey, bytes: Bytes) {
        let mut cache = self.previews.lock().unwrap();
        if cache.len() >= PREVIEW_CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, bytes);
    }
}

/// Hash of the geometry a rectified preview depends on.
pub fn geometry_hash(values: impl IntoIterator<Item = f64>, size: (usize, usize)) -> u64 {
    let mut h = DefaultHasher::new();
    for v in values {
        v.to_bits().hash(&mut h);
    }
    size.hash(&mut h);
    h.finish()
}
