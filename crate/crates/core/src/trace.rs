//! End-to-end trajectory computation for one project.
//!
//! Marks are gathered per object, registered to the target frame in recorder
//! mode, scaled to meters (geometric-progression ratios for longitudinal
//! objects, the constant road-width ratio otherwise), given speeds and
//! headings, and finally translated so every object sits at the origin at the
//! hit frame.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annot::{
    validate_annotations, Direction, EventType, FrameSequence, Mode, ObjectKind, ObjectSpec, ProjectDocument, ValidationReport,
};
use crate::geomkit::{GeomError, Homography, Point2};
use crate::scaling::{
    center_on_hit_point, fit_ratio_gradient, lateral_ratio, longitudinal_displacement, scale_lateral, scale_longitudinal,
    smooth_moving_average, PixelTrack, RatioMeasurement, RatioModel, ScalingError, Trajectory, TrackSample, TrajectoryPoint,
};
use crate::annot::Project;
use crate::geomkit::QuadCorrespondence;
use crate::stabilize::{ego_path, register_to_target_frame, stabilize_track, StabilizeError};
use crate::warp::{rectification_from_lane_quad, RectifySpec};

pub const EGO_OBJECT_ID: &str = "ego";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("annotations do not validate:\n{0}")]
    Validation(ValidationReport),
    #[error(transparent)]
    Scaling(#[from] ScalingError),
    #[error(transparent)]
    Stabilize(#[from] StabilizeError),
    #[error(transparent)]
    Geometry(#[from] GeomError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TraceOptions {
    /// Odd moving-average window applied to speeds; `None` leaves them raw.
    pub speed_smoothing: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub object_id: String,
    pub kind: ObjectKind,
    pub primary_direction: Direction,
    /// Set for reconstructions without a metric reference (recorder-mode ego path).
    pub approximate: bool,
    pub points: Vec<TrajectoryPoint>,
    pub speeds_mps: Vec<f64>,
    pub headings_rad: Vec<f64>,
}

impl TrajectoryRecord {
    fn new(spec: &ObjectSpec, approximate: bool, t: Trajectory) -> Self {
        Self {
            object_id: t.object_id,
            kind: spec.kind,
            primary_direction: spec.primary_direction,
            approximate,
            points: t.points,
            speeds_mps: t.speeds_mps,
            headings_rad: t.headings_rad,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub frame_index: u32,
    pub time_s: f64,
    #[serde(rename = "type")]
    pub kind: EventType,
    pub note: String,
}

/// Content of a trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceOutput {
    pub project_id: String,
    pub mode: Mode,
    pub fps: f64,
    pub hit_frame: u32,
    pub hit_frame_inferred: bool,
    pub lateral_ratio_m_per_px: f64,
    pub ratio_model: RatioModel,
    pub trajectories: Vec<TrajectoryRecord>,
    pub events: Vec<EventRecord>,
}

impl TraceOutput {
    /// Deterministic pretty JSON with a trailing newline.
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("trajectory values are finite");
        out.push(b'\n');
        out
    }

    pub fn from_json(bytes: &[u8]) -> serde_json::Result<Self> {
        serde_json::from_slice(bytes)
    }
}

/// Warp producing the working view of `frame`: the lane rectification in
/// surveillance mode, the registration onto the target frame in recorder mode.
pub fn frame_rectify_spec(project: &Project, sequence: &FrameSequence, frame: u32) -> Result<RectifySpec, TraceError> {
    let (out_width, out_height) = project.working_size(sequence.width, sequence.height);
    let h = match (project.mode, &project.reference_track) {
        (Mode::Recorder, Some(rt)) => {
            rt.validate()?;
            let pts = rt.per_frame_points.get(&frame).ok_or(StabilizeError::MissingRegistration { frame })?;
            if frame == rt.target_frame {
                Homography::IDENTITY
            } else {
                QuadCorrespondence::new(*pts, rt.target_points)
                    .and_then(|q| Homography::from_correspondences(&q))
                    .map_err(|source| StabilizeError::Frame { frame, source })?
            }
        }
        _ => rectification_from_lane_quad(&project.rectify_src_quad, &project.rectify_dst_rect)?,
    };
    Ok(RectifySpec { h, out_width, out_height, fill: 0 })
}

fn pixel_tracks(doc: &ProjectDocument) -> Vec<(ObjectSpec, PixelTrack)> {
    doc.project
        .objects
        .iter()
        .filter_map(|spec| {
            let samples: Vec<TrackSample> = doc
                .annotations
                .iter()
                .filter_map(|a| {
                    a.marks
                        .iter()
                        .find(|m| m.object_id == spec.id)
                        .map(|m| TrackSample { frame_index: a.frame_index, point: m.point() })
                })
                .collect();
            PixelTrack::new(spec.id.clone(), samples).ok().map(|t| (spec.clone(), t))
        })
        .collect()
}

/// Frame of closest approach between the designated vehicle and pedestrian
/// (first of each kind; otherwise the first two objects), measured in working
/// pixels. Ties go to the earlier frame. Without a usable pair, the last
/// marked frame of the first object.
pub fn infer_hit_frame(tracks: &[(ObjectSpec, PixelTrack)]) -> Option<u32> {
    let vehicle = tracks.iter().find(|(s, _)| s.kind == ObjectKind::Vehicle);
    let pedestrian = tracks.iter().find(|(s, _)| s.kind == ObjectKind::Pedestrian);
    let pair = match (vehicle, pedestrian) {
        (Some(v), Some(p)) => Some((v, p)),
        _ if tracks.len() >= 2 => Some((&tracks[0], &tracks[1])),
        _ => None,
    };
    if let Some(((_, a), (_, b))) = pair {
        let b_points: BTreeMap<u32, Point2> = b.samples.iter().map(|s| (s.frame_index, s.point)).collect();
        let best = a
            .samples
            .iter()
            .filter_map(|s| b_points.get(&s.frame_index).map(|q| (s.point.distance(q), s.frame_index)))
            .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        if let Some((_, frame)) = best {
            return Some(frame);
        }
    }
    tracks.first().and_then(|(_, t)| t.samples.last()).map(|s| s.frame_index)
}

fn finish(
    spec: &ObjectSpec,
    approximate: bool,
    track: &PixelTrack,
    xs: Vec<f64>,
    ys: Vec<f64>,
    fps: f64,
    hit_frame: u32,
    opts: &TraceOptions,
) -> Result<TrajectoryRecord, TraceError> {
    let frames: Vec<u32> = track.samples.iter().map(|s| s.frame_index).collect();
    let mut traj = Trajectory::from_series(track.object_id.clone(), &frames, &xs, &ys, fps, 1)?.with_kinematics(fps)?;
    if let Some(window) = opts.speed_smoothing {
        traj.speeds_mps = smooth_moving_average(&traj.speeds_mps, window)?;
    }
    let centered = center_on_hit_point(&traj, hit_frame)?;
    Ok(TrajectoryRecord::new(spec, approximate, centered))
}

/// Runs the full pipeline. Fails with the validation report when the
/// annotations have error-severity findings.
pub fn trace_project(doc: &ProjectDocument, sequence: &FrameSequence, opts: &TraceOptions) -> Result<TraceOutput, TraceError> {
    let report = validate_annotations(&doc.project, &doc.annotations, sequence);
    if report.has_errors() {
        return Err(TraceError::Validation(report));
    }
    let project = &doc.project;
    let n_frames = sequence.len() as u32;

    let registrations = match (project.mode, &project.reference_track) {
        (Mode::Recorder, Some(rt)) => Some(register_to_target_frame(rt)?),
        _ => None,
    };

    let mut tracks = pixel_tracks(doc);
    if let Some(regs) = &registrations {
        for (_, t) in &mut tracks {
            *t = stabilize_track(t, regs)?;
        }
    }

    let (hit_frame, hit_frame_inferred) = match &project.hit {
        Some(hit) => (hit.frame_index, false),
        None => (infer_hit_frame(&tracks).unwrap_or(1), true),
    };

    let r_lat = match project.real_road_width_m {
        Some(w) => lateral_ratio(w, project.road_width_px())?,
        None => 1.0,
    };
    let measurements: Vec<RatioMeasurement> = match project.real_reference_width_m {
        Some(w) => doc
            .annotations
            .iter()
            .filter_map(|a| a.ref_width_px.map(|px| RatioMeasurement { frame_index: a.frame_index, ref_width_px: px, ref_width_m: w }))
            .collect(),
        None => Vec::new(),
    };
    let model = if measurements.is_empty() {
        RatioModel::constant(r_lat, n_frames)
    } else {
        fit_ratio_gradient(&measurements, n_frames)?
    };

    let orient = |t: &PixelTrack| if project.flip_y { t.flipped_y() } else { t.clone() };

    let mut trajectories = Vec::with_capacity(tracks.len() + 1);
    for (spec, track) in &tracks {
        let t = orient(track);
        let xs = scale_lateral(&t, r_lat);
        let ys = match spec.primary_direction {
            Direction::Longitudinal => {
                let d = longitudinal_displacement(&t, &model, &measurements)?;
                scale_longitudinal(&t, &model, d)
            }
            Direction::Lateral => {
                let y1 = t.samples[0].point.y;
                t.samples.iter().map(|s| r_lat * (s.point.y - y1)).collect()
            }
        };
        trajectories.push(finish(spec, false, track, xs, ys, project.fps, hit_frame, opts)?);
    }

    if let Some(regs) = &registrations {
        let id = if project.object(EGO_OBJECT_ID).is_some() { "ego_path" } else { EGO_OBJECT_ID };
        let principal = Point2::new(sequence.width as f64 / 2.0, sequence.height as f64 / 2.0);
        // Frames whose principal point falls on the horizon carry no position.
        let usable: BTreeMap<u32, Homography> =
            regs.iter().filter(|(_, h)| h.map_point(principal).is_ok()).map(|(f, h)| (*f, *h)).collect();
        if usable.len() >= 2 {
            let path = ego_path(&usable, principal, id)?;
            let t = orient(&path);
            let xs = scale_lateral(&t, r_lat);
            let y1 = t.samples[0].point.y;
            let ys = t.samples.iter().map(|s| r_lat * (s.point.y - y1)).collect();
            let spec = ObjectSpec { id: id.into(), kind: ObjectKind::Vehicle, primary_direction: Direction::Longitudinal };
            trajectories.push(finish(&spec, true, &path, xs, ys, project.fps, hit_frame, opts)?);
        }
    }

    let events = doc
        .annotations
        .iter()
        .flat_map(|a| {
            a.events.iter().map(move |e| EventRecord {
                frame_index: a.frame_index,
                time_s: (a.frame_index as f64 - 1.0) / project.fps,
                kind: e.kind,
                note: e.note.clone(),
            })
        })
        .collect();

    Ok(TraceOutput {
        project_id: project.id.clone(),
        mode: project.mode,
        fps: project.fps,
        hit_frame,
        hit_frame_inferred,
        lateral_ratio_m_per_px: r_lat,
        ratio_model: model,
        trajectories,
        events,
    })
}
