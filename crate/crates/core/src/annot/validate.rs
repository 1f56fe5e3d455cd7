use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{FrameAnnotation, FrameSequence, Mode, Project};
use crate::geomkit::{is_degenerate_quad, signed_polygon_area, QuadCorrespondence};
use crate::stabilize::register_to_target_frame;
use crate::warp::default_output_size;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub frame_index: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub object_id: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    fn push(&mut self, severity: Severity, code: &str, message: String, frame_index: Option<u32>, object_id: Option<&str>) {
        self.findings.push(Finding {
            severity,
            code: code.into(),
            message,
            frame_index,
            object_id: object_id.map(str::to_string),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.findings.is_empty() {
            return writeln!(f, "no findings");
        }
        for finding in &self.findings {
            let sev = match finding.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            write!(f, "{sev}[{}]", finding.code)?;
            if let Some(frame) = finding.frame_index {
                write!(f, " frame {frame}")?;
            }
            if let Some(obj) = &finding.object_id {
                write!(f, " object {obj}")?;
            }
            writeln!(f, ": {}", finding.message)?;
        }
        Ok(())
    }
}

impl Project {
    /// Size of the pixel space marks live in: the rectified canvas in
    /// surveillance mode, the raw frame in recorder mode.
    pub fn working_size(&self, frame_width: u32, frame_height: u32) -> (usize, usize) {
        match self.mode {
            Mode::Surveillance => default_output_size(frame_width as usize, frame_height as usize, &self.rectify_dst_rect),
            Mode::Recorder => (frame_width as usize, frame_height as usize),
        }
    }
}

/// Checks annotations for completeness and consistency. Findings are data;
/// the same inputs always produce the same report.
pub fn validate_annotations(project: &Project, annotations: &[FrameAnnotation], sequence: &FrameSequence) -> ValidationReport {
    use Severity::{Error, Warning};

    let mut report = ValidationReport::default();
    let n_frames = sequence.len() as u32;

    let src_bad = is_degenerate_quad(&project.rectify_src_quad);
    let dst_bad = is_degenerate_quad(&project.rectify_dst_rect);
    if dst_bad {
        report.push(Error, "degenerate_quad", "rectify_dst_rect has three collinear corners".into(), None, None);
    }
    if project.mode == Mode::Surveillance {
        if src_bad {
            report.push(Error, "degenerate_quad", "rectify_src_quad has three collinear corners".into(), None, None);
        } else if !dst_bad {
            let same_winding = signed_polygon_area(&project.rectify_src_quad).signum()
                == signed_polygon_area(&project.rectify_dst_rect).signum();
            if !same_winding {
                report.push(
                    Error,
                    "winding_mismatch",
                    "rectify_src_quad and rectify_dst_rect have opposite corner order".into(),
                    None,
                    None,
                );
            } else if QuadCorrespondence::new(project.rectify_src_quad, project.rectify_dst_rect)
                .and_then(|q| crate::geomkit::Homography::from_correspondences(&q))
                .is_err()
            {
                report.push(Error, "degenerate_quad", "rectification homography is singular".into(), None, None);
            }
        }
    }

    let known: BTreeSet<&str> = project.objects.iter().map(|o| o.id.as_str()).collect();
    let (w, h) = project.working_size(sequence.width, sequence.height);
    let (max_x, max_y) = ((w - 1) as f64, (h - 1) as f64);

    let mut mark_counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut marked_frames = BTreeSet::new();
    for a in annotations {
        let frame = Some(a.frame_index);
        if a.frame_index < 1 || a.frame_index > n_frames {
            report.push(Error, "frame_out_of_range", format!("frame {} outside 1..={n_frames}", a.frame_index), frame, None);
        }
        if a.ref_width_px.is_some() && project.real_reference_width_m.is_none() {
            report.push(
                Error,
                "missing_reference_anchor",
                "ref_width_px given but real_reference_width_m is not set".into(),
                frame,
                None,
            );
        }
        for m in &a.marks {
            if !known.contains(m.object_id.as_str()) {
                report.push(Error, "unknown_object", format!("mark for undeclared object {:?}", m.object_id), frame, Some(&m.object_id));
                continue;
            }
            *mark_counts.entry(m.object_id.as_str()).or_default() += 1;
            marked_frames.insert(a.frame_index);
            if !(m.x >= 0.0 && m.x <= max_x && m.y >= 0.0 && m.y <= max_y) {
                report.push(
                    Error,
                    "mark_out_of_bounds",
                    format!("mark ({}, {}) outside the {w}×{h} working image", m.x, m.y),
                    frame,
                    Some(&m.object_id),
                );
            }
        }
    }

    for o in &project.objects {
        let count = mark_counts.get(o.id.as_str()).copied().unwrap_or(0);
        if count < 2 {
            report.push(
                Error,
                "insufficient_marks",
                format!("object has {count} mark(s); at least 2 are needed for a trajectory"),
                None,
                Some(&o.id),
            );
        }
    }

    if !project.objects.is_empty() && project.real_road_width_m.is_none() {
        report.push(Error, "missing_road_width", "real_road_width_m is required to scale trajectories".into(), None, None);
    }
    let has_longitudinal = project.objects.iter().any(|o| o.primary_direction == super::Direction::Longitudinal);
    if has_longitudinal && !annotations.iter().any(|a| a.ref_width_px.is_some()) {
        report.push(
            Warning,
            "no_reference_widths",
            "no ref_width_px measurements; longitudinal scaling falls back to the constant lateral ratio".into(),
            None,
            None,
        );
    }

    if let Some(hit) = &project.hit {
        if !known.contains(hit.object_id.as_str()) {
            report.push(Error, "unknown_hit_object", format!("hit names undeclared object {:?}", hit.object_id), None, Some(&hit.object_id));
        }
        if hit.frame_index < 1 || hit.frame_index > n_frames {
            report.push(Error, "frame_out_of_range", format!("hit frame {} outside 1..={n_frames}", hit.frame_index), Some(hit.frame_index), None);
        }
    }

    if let (Mode::Recorder, Some(rt)) = (project.mode, &project.reference_track) {
        if rt.target_frame < 1 || rt.target_frame > n_frames {
            report.push(
                Error,
                "frame_out_of_range",
                format!("reference target frame {} outside 1..={n_frames}", rt.target_frame),
                Some(rt.target_frame),
                None,
            );
        }
        for (&frame, pts) in &rt.per_frame_points {
            if is_degenerate_quad(pts) {
                report.push(Error, "degenerate_reference_quad", "reference points have three collinear corners".into(), Some(frame), None);
            }
        }
        for &frame in &marked_frames {
            if !rt.per_frame_points.contains_key(&frame) {
                report.push(Error, "missing_reference_points", "frame has marks but no reference points".into(), Some(frame), None);
            }
        }
        if let Ok(regs) = register_to_target_frame(rt) {
            for a in annotations {
                let Some(h) = regs.get(&a.frame_index) else { continue };
                for m in &a.marks {
                    if known.contains(m.object_id.as_str()) && h.map_point(m.point()).is_err() {
                        report.push(
                            Error,
                            "mark_at_horizon",
                            "mark maps to infinity under the frame registration".into(),
                            Some(a.frame_index),
                            Some(&m.object_id),
                        );
                    }
                }
            }
        }
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annot::{Mark, ProjectDocument};
    use std::path::PathBuf;

    fn seq(n: u32, w: u32, h: u32) -> FrameSequence {
        FrameSequence {
            dir: PathBuf::from("frames"),
            frames: (1..=n).map(|index| super::super::FrameFile { index, path: PathBuf::new() }).collect(),
            width: w,
            height: h,
        }
    }

    fn doc() -> ProjectDocument {
        let json = r#"{
            "id": "v", "mode": "surveillance", "fps": 10, "frame_dir": "frames",
            "real_reference_width_m": 1.8, "real_road_width_m": 7,
            "rectify_src_quad": [[0,0],[100,0],[100,100],[0,100]],
            "rectify_dst_rect": [[0,0],[100,0],[100,100],[0,100]],
            "objects": [{"id":"car","kind":"vehicle","primary_direction":"longitudinal"}],
            "annotations": [
              {"frame_index":1,"marks":[{"object_id":"car","x":50,"y":90}],"ref_width_px":20},
              {"frame_index":2,"marks":[{"object_id":"car","x":50,"y":70}],"ref_width_px":20}
            ]
        }"#;
        ProjectDocument::from_json(json.as_bytes(), "t").unwrap()
    }

    fn codes(r: &ValidationReport) -> Vec<&str> {
        r.findings.iter().map(|f| f.code.as_str()).collect()
    }

    #[test]
    fn consistent_annotations_yield_empty_report() {
        let d = doc();
        let r = validate_annotations(&d.project, &d.annotations, &seq(3, 100, 100));
        assert!(r.is_empty(), "{r}");
    }

    #[test]
    fn out_of_bounds_mark() {
        let mut d = doc();
        d.annotations[0].marks[0] = Mark { object_id: "car".into(), x: -5.0, y: 10.0 };
        let r = validate_annotations(&d.project, &d.annotations, &seq(3, 100, 100));
        assert_eq!(codes(&r), ["mark_out_of_bounds"]);
        assert!(r.has_errors());
    }

    #[test]
    fn single_mark_is_insufficient() {
        let mut d = doc();
        d.annotations.truncate(1);
        let r = validate_annotations(&d.project, &d.annotations, &seq(3, 100, 100));
        assert_eq!(codes(&r), ["insufficient_marks"]);
        assert_eq!(r.findings[0].object_id.as_deref(), Some("car"));
    }

    #[test]
    fn anchors_and_references() {
        let mut d = doc();
        d.project.real_reference_width_m = None;
        d.project.real_road_width_m = None;
        d.annotations[1].marks[0].object_id = "ghost".into();
        let r = validate_annotations(&d.project, &d.annotations, &seq(1, 100, 100));
        let c = codes(&r);
        for expected in ["missing_reference_anchor", "unknown_object", "frame_out_of_range", "insufficient_marks", "missing_road_width"] {
            assert!(c.contains(&expected), "{c:?}");
        }
    }

    #[test]
    fn degenerate_and_reversed_quads() {
        let mut d = doc();
        d.project.rectify_src_quad[2] = crate::geomkit::Point2::new(50.0, 0.0);
        let r = validate_annotations(&d.project, &d.annotations, &seq(3, 100, 100));
        assert_eq!(codes(&r), ["degenerate_quad"]);

        let mut d = doc();
        d.project.rectify_src_quad.reverse();
        let r = validate_annotations(&d.project, &d.annotations, &seq(3, 100, 100));
        assert_eq!(codes(&r), ["winding_mismatch"]);
    }

    #[test]
    fn missing_widths_is_a_warning() {
        let mut d = doc();
        for a in &mut d.annotations {
            a.ref_width_px = None;
        }
        let r = validate_annotations(&d.project, &d.annotations, &seq(3, 100, 100));
        assert_eq!(codes(&r), ["no_reference_widths"]);
        assert!(!r.has_errors());
    }

    #[test]
    fn recorder_frames_need_reference_points() {
        let json = r#"{
            "id": "r", "mode": "recorder", "fps": 10, "frame_dir": "frames", "real_road_width_m": 7,
            "rectify_src_quad": [[0,0],[100,0],[100,100],[0,100]],
            "rectify_dst_rect": [[0,0],[100,0],[100,100],[0,100]],
            "objects": [{"id":"ped","kind":"pedestrian","primary_direction":"lateral"}],
            "reference_track": {"target_frame": 2,
                "target_points": [[10,10],[90,10],[90,90],[10,90]],
                "per_frame_points": {"2": [[10,10],[90,10],[90,90],[10,90]]}},
            "annotations": [
              {"frame_index":1,"marks":[{"object_id":"ped","x":5,"y":5}]},
              {"frame_index":2,"marks":[{"object_id":"ped","x":6,"y":5}]}
            ]
        }"#;
        let d = ProjectDocument::from_json(json.as_bytes(), "t").unwrap();
        let r = validate_annotations(&d.project, &d.annotations, &seq(2, 100, 100));
        assert_eq!(codes(&r), ["missing_reference_points"]);
        assert_eq!(r.findings[0].frame_index, Some(1));
    }

    #[test]
    fn report_renders_one_line_per_finding() {
        let mut d = doc();
        d.annotations.truncate(1);
        let r = validate_annotations(&d.project, &d.annotations, &seq(3, 100, 100));
        assert_eq!(r.to_string().lines().count(), 1);
        assert!(r.to_string().starts_with("error[insufficient_marks] object car"));
    }
}
