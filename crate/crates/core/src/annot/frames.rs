use std::path::{Path, PathBuf};

use super::AnnotError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameFile {
    pub index: u32,
    pub path: PathBuf,
}

/// Extracted frames `frame_0001.png … frame_NNNN.png`, contiguous from 1, uniform size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSequence {
    pub dir: PathBuf,
    pub frames: Vec<FrameFile>,
    pub width: u32,
    pub height: u32,
}

impl FrameSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, index: u32) -> Option<&FrameFile> {
        index.checked_sub(1).and_then(|i| self.frames.get(i as usize))
    }
}

/// Frame index of a `frame_<digits>.<png|jpg|jpeg>` file name.
pub fn parse_frame_name(name: &str) -> Option<u32> {
    let rest = name.strip_prefix("frame_")?;
    let (digits, ext) = rest.split_once('.')?;
    if !matches!(ext.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg") {
        return None;
    }
    if digits.len() < 4 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

pub fn ingest_frames(dir: &Path) -> Result<FrameSequence, AnnotError> {
    if !dir.is_dir() {
        return Err(AnnotError::MissingFrameDir(dir.into()));
    }
    let io = |source| AnnotError::Io { path: dir.into(), source };
    let mut frames = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let entry = entry.map_err(io)?;
        let name = entry.file_name();
        if let Some(index) = name.to_str().and_then(parse_frame_name) {
            frames.push(FrameFile { index, path: entry.path() });
        }
    }
    if frames.is_empty() {
        return Err(AnnotError::EmptyDirectory(dir.into()));
    }
    frames.sort_by_key(|f| f.index);

    let mut expected = 1;
    for f in &frames {
        if f.index < expected {
            return Err(AnnotError::DuplicateFrame { frame: f.index });
        }
        if f.index > expected {
            return Err(AnnotError::MissingFrame(expected));
        }
        expected += 1;
    }

    let dims = |f: &FrameFile| {
        image::image_dimensions(&f.path).map_err(|e| AnnotError::Image { path: f.path.clone(), message: e.to_string() })
    };
    let (width, height) = dims(&frames[0])?;
    for f in &frames[1..] {
        let (w, h) = dims(f)?;
        if (w, h) != (width, height) {
            return Err(AnnotError::DimensionMismatch { frame: f.index, width, height, got_width: w, got_height: h });
        }
    }
    Ok(FrameSequence { dir: dir.into(), frames, width, height })
}
