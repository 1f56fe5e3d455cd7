//! Pixel-to-meter scaling of feature-point tracks.
//!
//! Longitudinal motion uses a meters-per-pixel ratio that varies from frame
//! to frame as a geometric progression `r(i) = r1 · q^(i−1)`; lateral motion
//! uses one constant ratio taken from the road width.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geomkit::Point2;

/// Displacement magnitude below which a heading is carried forward (m).
pub const HEADING_MIN_STEP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScalingError {
    #[error("non-positive ratio input at frame {frame}")]
    NonPositiveRatio { frame: u32 },
    #[error("duplicate reference measurement for frame {frame}")]
    DuplicateFrameIndex { frame: u32 },
    #[error("frame {frame} outside 1..={n_frames}")]
    FrameOutOfRange { frame: u32, n_frames: u32 },
    #[error("no reference measurements")]
    NoMeasurements,
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// A reference object of known width `ref_width_m` measured as `ref_width_px` in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioMeasurement {
    pub frame_index: u32,
    pub ref_width_px: f64,
    pub ref_width_m: f64,
}

impl RatioMeasurement {
    pub fn ratio(&self) -> f64 {
        frame_ratio(self)
    }

    fn check(&self) -> Result<(), ScalingError> {
        if !(self.ref_width_px > 0.0 && self.ref_width_m > 0.0) || !self.ratio().is_finite() {
            return Err(ScalingError::NonPositiveRatio { frame: self.frame_index });
        }
        Ok(())
    }
}

/// Meters per pixel for one measurement.
pub fn frame_ratio(m: &RatioMeasurement) -> f64 {
    m.ref_width_m / m.ref_width_px
}

/// Geometric progression of per-frame meters-per-pixel ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioModel {
    pub r1: f64,
    pub q: f64,
    pub n_frames: u32,
}

impl RatioModel {
    pub fn constant(ratio: f64, n_frames: u32) -> Self {
        Self { r1: ratio, q: 1.0, n_frames }
    }

    /// `r1 · q^(frame−1)`.
    pub fn ratio_at(&self, frame_index: u32) -> f64 {
        self.r1 * self.q.powi(frame_index as i32 - 1)
    }
}

/// Fits `(r1, q)` to the measured ratios.
///
/// One measurement gives a constant model. Two give the exact two-point
/// gradient `q = (r_j / r_i)^(1/(j−i))`. Three or more are fitted by least
/// squares on `ln r` against `i − 1`.
pub fn fit_ratio_gradient(measurements: &[RatioMeasurement], n_frames: u32) -> Result<RatioModel, ScalingError> {
    if measurements.is_empty() {
        return Err(ScalingError::NoMeasurements);
    }
    let mut seen = HashSet::new();
    for m in measurements {
        m.check()?;
        if m.frame_index < 1 || m.frame_index > n_frames {
            return Err(ScalingError::FrameOutOfRange { frame: m.frame_index, n_frames });
        }
        if !seen.insert(m.frame_index) {
            return Err(ScalingError::DuplicateFrameIndex { frame: m.frame_index });
        }
    }

    let mut sorted = measurements.to_vec();
    sorted.sort_by_key(|m| m.frame_index);
    let (r1, q) = match sorted.as_slice() {
        [only] => (only.ratio(), 1.0),
        [a, b] => {
            let span = (b.frame_index - a.frame_index) as f64;
            let q = (b.ratio() / a.ratio()).powf(1.0 / span);
            (a.ratio() / q.powi(a.frame_index as i32 - 1), q)
        }
        many => {
            let n = many.len() as f64;
            let xs: Vec<f64> = many.iter().map(|m| (m.frame_index - 1) as f64).collect();
            let ys: Vec<f64> = many.iter().map(|m| m.ratio().ln()).collect();
            let mean_x = xs.iter().sum::<f64>() / n;
            let mean_y = ys.iter().sum::<f64>() / n;
            let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
            let slope = sxy / sxx;
            ((mean_y - slope * mean_x).exp(), slope.exp())
        }
    };
    if !(r1 > 0.0 && r1.is_finite() && q > 0.0 && q.is_finite()) {
        return Err(ScalingError::InvalidParameter(format!("fit produced r1 = {r1}, q = {q}")));
    }
    Ok(RatioModel { r1, q, n_frames })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackSample {
    pub frame_index: u32,
    pub point: Point2,
}

/// Feature points of one object, ordered by strictly increasing frame index.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelTrack {
    pub object_id: String,
    pub samples: Vec<TrackSample>,
}

impl PixelTrack {
    pub fn new(object_id: impl Into<String>, samples: Vec<TrackSample>) -> Result<Self, ScalingError> {
        if samples.is_empty() {
            return Err(ScalingError::TooFewPoints { needed: 1, got: 0 });
        }
        if samples.windows(2).any(|w| w[0].frame_index >= w[1].frame_index) {
            return Err(ScalingError::InvalidParameter("frame indices must be strictly increasing".into()));
        }
        Ok(Self { object_id: object_id.into(), samples })
    }

    /// Track with samples at frames `first, first+1, ...`.
    pub fn from_points(object_id: impl Into<String>, first_frame: u32, points: &[Point2]) -> Result<Self, ScalingError> {
        let samples = points
            .iter()
            .enumerate()
            .map(|(k, &point)| TrackSample { frame_index: first_frame + k as u32, point })
            .collect();
        Self::new(object_id, samples)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Same track with every pixel `y` negated.
    pub fn flipped_y(&self) -> Self {
        let samples = self
            .samples
            .iter()
            .map(|s| TrackSample { frame_index: s.frame_index, point: Point2::new(s.point.x, -s.point.y) })
            .collect();
        Self { object_id: self.object_id.clone(), samples }
    }
}

/// Total real-world longitudinal displacement `D = Σ (y_{i+1} − y_i) · r(i)`.
///
/// `r(i)` is `W / h(i)` from an override measured at frame `i` when one
/// exists, otherwise the model ratio.
pub fn longitudinal_displacement(
    track: &PixelTrack,
    model: &RatioModel,
    overrides: &[RatioMeasurement],
) -> Result<f64, ScalingError> {
    if track.len() < 2 {
        return Err(ScalingError::TooFewPoints { needed: 2, got: track.len() });
    }
    let mut measured = BTreeMap::new();
    for m in overrides {
        m.check()?;
        if measured.insert(m.frame_index, m.ratio()).is_some() {
            return Err(ScalingError::DuplicateFrameIndex { frame: m.frame_index });
        }
    }
    Ok(track
        .samples
        .windows(2)
        .map(|w| {
            let frame = w[0].frame_index;
            let r = measured.get(&frame).copied().unwrap_or_else(|| model.ratio_at(frame));
            (w[1].point.y - w[0].point.y) * r
        })
        .sum())
}

/// Longitudinal positions `Y_i = (d / S_N) · S_i` where `S_i` is the
/// gradient-weighted cumulative pixel displacement.
///
/// Weights are `q^(f_j − f_1)`; the common factor `q^(f_1 − 1)` cancels in
/// the normalization. `Y_1 = 0` and `Y_N = d` exactly; a stationary track
/// (`S_N = 0`) yields all zeros.
pub fn scale_longitudinal(track: &PixelTrack, model: &RatioModel, d: f64) -> Vec<f64> {
    let first = track.samples.first().map_or(1, |s| s.frame_index);
    let mut cumulative = Vec::with_capacity(track.len());
    let mut s = 0.0;
    cumulative.push(s);
    for w in track.samples.windows(2) {
        let weight = model.q.powi((w[0].frame_index - first) as i32);
        s += (w[1].point.y - w[0].point.y) * weight;
        cumulative.push(s);
    }
    let total = s;
    if total == 0.0 || !d.is_finite() {
        return vec![0.0; track.len()];
    }
    let scale = d / total;
    let mut out: Vec<f64> = cumulative.iter().map(|c| c * scale).collect();
    if let Some(last) = out.last_mut() {
        if track.len() > 1 {
            *last = d;
        }
    }
    out
}

/// Constant lateral meters-per-pixel ratio from the road width.
pub fn lateral_ratio(road_width_m: f64, road_width_px: f64) -> Result<f64, ScalingError> {
    if !(road_width_m > 0.0 && road_width_px > 0.0) {
        return Err(ScalingError::InvalidParameter("road widths must be positive".into()));
    }
    Ok(road_width_m / road_width_px)
}

/// `X_i = r_lat · (x_i − x_1)`.
pub fn scale_lateral(track: &PixelTrack, r_lat: f64) -> Vec<f64> {
    let Some(first) = track.samples.first() else {
        return Vec::new();
    };
    let x1 = first.point.x;
    track.samples.iter().map(|s| r_lat * (s.point.x - x1)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub frame_index: u32,
    pub time_s: f64,
    pub x_m: f64,
    pub y_m: f64,
}

/// World-coordinate track of one object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub object_id: String,
    pub points: Vec<TrajectoryPoint>,
    pub speeds_mps: Vec<f64>,
    pub headings_rad: Vec<f64>,
}

impl Trajectory {
    /// Builds a trajectory from parallel coordinate series, timing each point
    /// from `time_origin_frame` at `fps`. Kinematics are left empty.
    pub fn from_series(
        object_id: impl Into<String>,
        frames: &[u32],
        xs: &[f64],
        ys: &[f64],
        fps: f64,
        time_origin_frame: u32,
    ) -> Result<Self, ScalingError> {
        if frames.len() != xs.len() || frames.len() != ys.len() {
            return Err(ScalingError::InvalidParameter("series lengths differ".into()));
        }
        if !(fps > 0.0) {
            return Err(ScalingError::InvalidParameter("fps must be positive".into()));
        }
        let points = frames
            .iter()
            .zip(xs.iter().zip(ys))
            .map(|(&f, (&x, &y))| TrajectoryPoint {
                frame_index: f,
                time_s: (f as f64 - time_origin_frame as f64) / fps,
                x_m: x,
                y_m: y,
            })
            .collect();
        Ok(Self { object_id: object_id.into(), points, speeds_mps: Vec::new(), headings_rad: Vec::new() })
    }

    /// Fills speeds and headings from the point series.
    pub fn with_kinematics(mut self, fps: f64) -> Result<Self, ScalingError> {
        if self.points.len() < 2 {
            self.speeds_mps = vec![0.0; self.points.len()];
            self.headings_rad = vec![0.0; self.points.len()];
            return Ok(self);
        }
        self.speeds_mps = estimate_velocity(&self, fps)?;
        self.headings_rad = estimate_heading(&self)?;
        Ok(self)
    }

    pub fn position_at(&self, frame_index: u32) -> Option<(f64, f64)> {
        self.points.iter().find(|p| p.frame_index == frame_index).map(|p| (p.x_m, p.y_m))
    }
}

/// Index of the sample nearest `frame`; ties go to the earlier sample.
pub fn nearest_sample(points: &[TrajectoryPoint], frame: u32) -> Option<usize> {
    points
        .iter()
        .enumerate()
        .min_by_key(|(_, p)| (p.frame_index.abs_diff(frame), p.frame_index))
        .map(|(i, _)| i)
}

/// Translates the trajectory so its sample at `hit_frame` (or the nearest one) sits at the origin.
pub fn center_on_hit_point(traj: &Trajectory, hit_frame: u32) -> Result<Trajectory, ScalingError> {
    let idx = nearest_sample(&traj.points, hit_frame).ok_or(ScalingError::EmptyTrajectory)?;
    let (hx, hy) = (traj.points[idx].x_m, traj.points[idx].y_m);
    let mut out = traj.clone();
    for p in &mut out.points {
        p.x_m -= hx;
        p.y_m -= hy;
    }
    Ok(out)
}

/// Finite-difference velocity vectors: central inside, one-sided at the ends.
fn velocity_vectors(traj: &Trajectory, fps: f64) -> Result<Vec<(f64, f64)>, ScalingError> {
    let pts = &traj.points;
    if pts.len() < 2 {
        return Err(ScalingError::TooFewPoints { needed: 2, got: pts.len() });
    }
    if !(fps > 0.0) {
        return Err(ScalingError::InvalidParameter("fps must be positive".into()));
    }
    let n = pts.len();
    Ok((0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            let dt = (pts[b].frame_index - pts[a].frame_index) as f64 / fps;
            ((pts[b].x_m - pts[a].x_m) / dt, (pts[b].y_m - pts[a].y_m) / dt)
        })
        .collect())
}

/// Per-point speed (m/s) from finite differences of position over time.
pub fn estimate_velocity(traj: &Trajectory, fps: f64) -> Result<Vec<f64>, ScalingError> {
    Ok(velocity_vectors(traj, fps)?.into_iter().map(|(vx, vy)| vx.hypot(vy)).collect())
}

/// Speed over each segment between consecutive points (one-sided differences).
pub fn segment_speeds(traj: &Trajectory, fps: f64) -> Result<Vec<f64>, ScalingError> {
    if !(fps > 0.0) {
        return Err(ScalingError::InvalidParameter("fps must be positive".into()));
    }
    Ok(traj
        .points
        .windows(2)
        .map(|w| {
            let dt = (w[1].frame_index - w[0].frame_index) as f64 / fps;
            (w[1].x_m - w[0].x_m).hypot(w[1].y_m - w[0].y_m) / dt
        })
        .collect())
}

/// Heading per point, `atan2(ΔX, ΔY)`: 0 along +Y, +π/2 along +X.
///
/// Uses the same difference stencil as [`estimate_velocity`]. Steps shorter
/// than [`HEADING_MIN_STEP`] repeat the previous heading (0 for the first point).
pub fn estimate_heading(traj: &Trajectory) -> Result<Vec<f64>, ScalingError> {
    let pts = &traj.points;
    if pts.len() < 2 {
        return Err(ScalingError::TooFewPoints { needed: 2, got: pts.len() });
    }
    let n = pts.len();
    let mut headings = Vec::with_capacity(n);
    let mut previous = 0.0;
    for i in 0..n {
        let (a, b) = match i {
            0 => (0, 1),
            i if i == n - 1 => (n - 2, n - 1),
            i => (i - 1, i + 1),
        };
        let dx = pts[b].x_m - pts[a].x_m;
        let dy = pts[b].y_m - pts[a].y_m;
        if dx.hypot(dy) >= HEADING_MIN_STEP {
            previous = dx.atan2(dy);
        }
        headings.push(previous);
    }
    Ok(headings)
}

/// Centered moving average with an odd window, truncated at the ends.
pub fn smooth_moving_average(values: &[f64], window: usize) -> Result<Vec<f64>, ScalingError> {
    if window == 0 || window % 2 == 0 {
        return Err(ScalingError::InvalidParameter(format!("window must be odd, got {window}")));
    }
    let half = window / 2;
    Ok((0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(values.len() - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect())
}
