//! Automated multi-sensor calibration chain: target pose estimation,
//! per-camera intrinsic refinement, rig/INS hand-eye calibration with
//! reprojection refinement, and LiDAR/rig extrinsic calibration from
//! planar-target constraints.

mod handeye;
mod intrinsics;
mod lidar;
mod target;

pub use handeye::{handeye_initialize, handeye_refine, HandeyeRefineOutcome};
pub use intrinsics::calibrate_intrinsics;
pub use lidar::{
    lidar_rig_refine, lidar_rig_rotation, lidar_rig_translation, segment_plane,
    PlaneObservation,
};
pub use target::estimate_target_pose;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibError {
    #[error("need at least {needed} corners, got {got}")]
    InsufficientCorners { needed: usize, got: usize },
    #[error("observed corners are (near-)collinear")]
    DegenerateConfiguration,
    #[error("optimization did not converge")]
    NoConvergence,
    #[error("target orientations do not span enough rotation")]
    InsufficientMotion,
    #[error("need at least {needed} relative-motion pairs, got {got}")]
    InsufficientPairs { needed: usize, got: usize },
    #[error("relative rotations share a single axis; hand-eye unobservable")]
    DegenerateMotion,
    #[error("no plane found (inlier ratio below 20%)")]
    NoPlaneFound,
    #[error("plane normals are (near-)parallel")]
    DegenerateNormals,
    #[error("camera-side normals do not span 3D")]
    RankDeficientNormals,
    #[error("need at least {needed} tracks with >= 3 observations, got {got}")]
    InsufficientTracks { needed: usize, got: usize },
}

pub type CalibResult<T> = Result<T, CalibError>;

/// Reprojection Huber band, pixels.
pub(crate) const HUBER_PX: f64 = 2.0;
