use std::fmt;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use trajex_core::annot::{ingest_frames, load_project, AnnotError, FrameSequence, Mode, ProjectDocument};
use trajex_core::export::{to_csv, to_svg, PlotStyle};
use trajex_core::trace::{frame_rectify_spec, trace_project, TraceError, TraceOptions, TraceOutput};
use trajex_core::warp::{rectify_encoded, ImageError};

#[derive(Debug)]
pub enum CliError {
    /// Invalid project, annotations or arguments.
    Domain(String),
    /// Files, sockets and other environment failures.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Domain(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<AnnotError> for CliError {
    fn from(e: AnnotError) -> Self {
        match e {
            AnnotError::Io { .. } | AnnotError::Image { .. } | AnnotError::MissingFrameDir(_) | AnnotError::EmptyDirectory(_) => {
                CliError::Io(e.to_string())
            }
            other => CliError::Domain(other.to_string()),
        }
    }
}

fn io_error(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameRange {
    pub start: u32,
    pub end: u32,
}

impl FromStr for FrameRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once("..").ok_or_else(|| format!("expected A..B, got `{s}`"))?;
        let parse = |v: &str| v.trim().parse::<u32>().map_err(|_| format!("bad frame index `{v}`"));
        let (start, end) = (parse(a)?, parse(b)?);
        if start == 0 || start > end {
            return Err(format!("empty or invalid range `{s}`"));
        }
        Ok(Self { start, end })
    }
}

fn load(project: &Path) -> Result<(ProjectDocument, FrameSequence), CliError> {
    let doc = load_project(project)?;
    let dir = doc.project.frame_dir_path(project.parent().unwrap_or(Path::new(".")));
    let seq = ingest_frames(&dir)?;
    Ok((doc, seq))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| io_error(path, e))
}

pub fn rectify(project: &Path, out_dir: &Path, frames: Option<FrameRange>) -> Result<(), CliError> {
    let (doc, seq) = load(project)?;
    let n = seq.len() as u32;
    let range = frames.unwrap_or(FrameRange { start: 1, end: n });
    if range.end > n {
        return Err(CliError::Domain(format!("frame range {}..{} exceeds the {n} frames available", range.start, range.end)));
    }
    let what = match doc.project.mode {
        Mode::Surveillance => "rectify_src_quad → rectify_dst_rect".to_string(),
        Mode::Recorder => "reference_track".to_string(),
    };
    let jobs = (range.start..=range.end)
        .map(|i| {
            let spec = frame_rectify_spec(&doc.project, &seq, i)
                .map_err(|e| CliError::Domain(format!("cannot rectify frame {i} ({what}): {e}")))?;
            Ok((seq.frame(i).expect("index within sequence").clone(), spec))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    std::fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    jobs.par_iter().try_for_each(|(frame, spec)| {
        let source = std::fs::read(&frame.path).map_err(|e| io_error(&frame.path, e))?;
        let bytes = rectify_encoded(&source, spec).map_err(|e| match e {
            ImageError::Geometry(g) => CliError::Domain(format!("frame {}: {g}", frame.index)),
            other => io_error(&frame.path, other),
        })?;
        write(&out_dir.join(format!("frame_{:04}.png", frame.index)), &bytes)
    })?;
    tracing::info!(frames = jobs.len(), out = %out_dir.display(), "rectified");
    Ok(())
}

pub fn trace(project: &Path, out: &Path, fps: Option<f64>, smooth: Option<usize>) -> Result<(), CliError> {
    let (mut doc, seq) = load(project)?;
    if let Some(fps) = fps {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(CliError::Domain(format!("--fps must be positive, got {fps}")));
        }
        doc.project.fps = fps;
    }
    let output = trace_project(&doc, &seq, &TraceOptions { speed_smoothing: smooth }).map_err(|e| match e {
        TraceError::Validation(report) => CliError::Domain(format!("annotations do not validate\n{report}")),
        other => CliError::Domain(other.to_string()),
    })?;
    write(out, &output.to_json())
}

fn read_trace(path: &Path) -> Result<TraceOutput, CliError> {
    let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
    TraceOutput::from_json(&bytes).map_err(|e| CliError::Domain(format!("{}: not a trajectory file: {e}", path.display())))
}

pub fn export(trajectory: &Path, out_csv: &Path) -> Result<(), CliError> {
    let t = read_trace(trajectory)?;
    let csv = to_csv(&t).map_err(|e| io_error(out_csv, e))?;
    write(out_csv, &csv)
}

pub fn plot(trajectory: &Path, out_svg: &Path, style: PlotStyle) -> Result<(), CliError> {
    let t = read_trace(trajectory)?;
    write(out_svg, to_svg(&t, style).as_bytes())
}

pub fn serve(project_dir: PathBuf, bind: SocketAddr, cors_origin: Option<String>) -> Result<(), CliError> {
    if !project_dir.is_dir() {
        return Err(io_error(&project_dir, "not a readable directory"));
    }
    let origin = cors_origin
        .map(|o| o.parse().map_err(|_| CliError::Domain(format!("invalid --cors-origin `{o}`"))))
        .transpose()?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(bind).await.map_err(|e| CliError::Io(format!("cannot bind {bind}: {e}")))?;
        let addr = listener.local_addr().map_err(|e| CliError::Io(e.to_string()))?;
        eprintln!("listening on http://{addr}");
        let app = trajex_server::router_with_cors(project_dir, origin);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        };
        trajex_server::serve(listener, app, shutdown).await.map_err(|e| CliError::Io(e.to_string()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_range_parsing() {
        assert_eq!("5..5".parse::<FrameRange>().unwrap(), FrameRange { start: 5, end: 5 });
        assert_eq!("1..200".parse::<FrameRange>().unwrap(), FrameRange { start: 1, end: 200 });
        assert!("0..3".parse::<FrameRange>().is_err());
        assert!("4..3".parse::<FrameRange>().is_err());
        assert!("7".parse::<FrameRange>().is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::from(AnnotError::MissingFrame(3)).exit_code(), 1);
        assert_eq!(CliError::from(AnnotError::EmptyDirectory("x".into())).exit_code(), 2);
        assert_eq!(CliError::Io(String::new()).exit_code(), 2);
    }
}
