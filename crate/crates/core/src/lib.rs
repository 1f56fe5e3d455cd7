//! Reconstruction of vehicle and pedestrian trajectories from video frames.

pub mod annot;
pub mod export;
pub mod geomkit;
pub mod scaling;
pub mod stabilize;
pub mod trace;
pub mod warp;
