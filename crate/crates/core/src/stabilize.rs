//! Dash-cam registration: every frame is mapped into the coordinate system of
//! a target frame (normally the last one) through a reference quadrilateral
//! that the operator marks on the same physical corners in each frame.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geomkit::{is_degenerate_quad, GeomError, Homography, Point2, QuadCorrespondence};
use crate::scaling::{PixelTrack, TrackSample};
use crate::warp::{rectify_image, Image, RectifySpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilizeError {
    #[error("frame {frame}: {source}")]
    Frame { frame: u32, source: GeomError },
    #[error("no registration for frame {frame}")]
    MissingRegistration { frame: u32 },
    #[error("invalid reference track: {0}")]
    InvalidTrack(String),
}

/// The four reference corners in every frame plus their positions in the target frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTrack {
    pub target_frame: u32,
    pub target_points: [Point2; 4],
    #[serde(with = "frame_keyed")]
    pub per_frame_points: BTreeMap<u32, [Point2; 4]>,
}

/// JSON object keys must be strings; frames are written as decimal keys.
mod frame_keyed {
    use std::collections::BTreeMap;

    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::geomkit::Point2;

    pub fn serialize<S: Serializer>(map: &BTreeMap<u32, [Point2; 4]>, s: S) -> Result<S::Ok, S::Error> {
        // Numeric key order, so "2" precedes "10".
        s.collect_map(map.iter().map(|(k, v)| (k.to_string(), v)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<u32, [Point2; 4]>, D::Error> {
        let raw = BTreeMap::<String, [Point2; 4]>::deserialize(d)?;
        raw.into_iter()
            .map(|(k, v)| {
                k.parse::<u32>()
                    .map(|f| (f, v))
                    .map_err(|_| D::Error::custom(format!("frame key {k:?} is not a non-negative integer")))
            })
            .collect()
    }
}

impl ReferenceTrack {
    pub fn validate(&self) -> Result<(), StabilizeError> {
        if is_degenerate_quad(&self.target_points) {
            return Err(StabilizeError::Frame {
                frame: self.target_frame,
                source: GeomError::DegenerateCorrespondence("target points have three collinear corners".into()),
            });
        }
        match self.per_frame_points.get(&self.target_frame) {
            Some(pts) if *pts == self.target_points => {}
            Some(_) => {
                return Err(StabilizeError::InvalidTrack(format!(
                    "entry for target frame {} differs from target_points",
                    self.target_frame
                )))
            }
            None => {
                return Err(StabilizeError::InvalidTrack(format!(
                    "no reference points for target frame {}",
                    self.target_frame
                )))
            }
        }
        Ok(())
    }
}

/// Per-frame homographies carrying each frame's reference corners onto the target corners.
pub fn register_to_target_frame(track: &ReferenceTrack) -> Result<BTreeMap<u32, Homography>, StabilizeError> {
    track.validate()?;
    let entries: Vec<(u32, [Point2; 4])> = track.per_frame_points.iter().map(|(f, p)| (*f, *p)).collect();
    entries
        .par_iter()
        .map(|&(frame, pts)| {
            if frame == track.target_frame {
                return Ok((frame, Homography::IDENTITY));
            }
            QuadCorrespondence::new(pts, track.target_points)
                .and_then(|q| Homography::from_correspondences(&q))
                .map(|h| (frame, h))
                .map_err(|source| StabilizeError::Frame { frame, source })
        })
        .collect()
}

/// Maps each sample through its frame's registration.
pub fn stabilize_track(
    pixel_track: &PixelTrack,
    registrations: &BTreeMap<u32, Homography>,
) -> Result<PixelTrack, StabilizeError> {
    let samples = pixel_track
        .samples
        .iter()
        .map(|s| {
            let h = registrations
                .get(&s.frame_index)
                .ok_or(StabilizeError::MissingRegistration { frame: s.frame_index })?;
            let point = h
                .map_point(s.point)
                .map_err(|source| StabilizeError::Frame { frame: s.frame_index, source })?;
            Ok(TrackSample { frame_index: s.frame_index, point })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PixelTrack { object_id: pixel_track.object_id.clone(), samples })
}

/// Warps each `(frame_index, image)` into the target frame's canvas.
pub fn stabilize_sequence(
    frames: &[(u32, Image)],
    registrations: &BTreeMap<u32, Homography>,
    out_width: usize,
    out_height: usize,
    fill: u8,
) -> Result<Vec<Image>, StabilizeError> {
    frames
        .par_iter()
        .map(|(frame, img)| {
            let h = *registrations
                .get(frame)
                .ok_or(StabilizeError::MissingRegistration { frame: *frame })?;
            rectify_image(img, &RectifySpec { h, out_width, out_height, fill })
                .map_err(|source| StabilizeError::Frame { frame: *frame, source })
        })
        .collect()
}

/// Approximate ego path: the image point `principal` of every registered
/// frame expressed in target-frame coordinates.
pub fn ego_path(
    registrations: &BTreeMap<u32, Homography>,
    principal: Point2,
    object_id: &str,
) -> Result<PixelTrack, StabilizeError> {
    let samples = registrations
        .iter()
        .map(|(&frame, h)| {
            h.map_point(principal)
                .map(|point| TrackSample { frame_index: frame, point })
                .map_err(|source| StabilizeError::Frame { frame, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    PixelTrack::new(object_id, samples).map_err(|e| StabilizeError::InvalidTrack(e.to_string()))
}
