//! Rigid-body and camera geometry: SE(3) poses, the unified fisheye
//! projection model with plumb-bob distortion, planes, and plane-induced
//! cross-camera warping.
//!
//! Conventions used throughout the crate:
//! - A [`RigidPose`] maps point coordinates from its source frame into its
//!   target frame: `p_out = R * p_in + t`.
//! - Vehicle trajectories store body-in-world poses (body -> world).
//! - Rig extrinsics store body -> camera transforms.
//! - Camera frames are right-handed with +z along the optical axis, +x to
//!   the right and +y down in the image.

mod camera;
mod plane;
mod pose;
mod rig;
mod warp;

pub use camera::CameraModel;
pub use plane::Plane3;
pub use pose::RigidPose;
pub use rig::{CameraRig, RigCamera};
pub use warp::warp_via_plane;

use thiserror::Error;

/// Errors from geometric operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    /// The point projects behind the unified model's valid cone
    /// (xi-shifted z component not positive).
    #[error("point is behind the projection cone")]
    BehindProjectionPoint,
    /// Newton inversion of the plumb-bob distortion did not converge.
    #[error("distortion inversion diverged after {0} iterations")]
    DistortionInversionDiverged(usize),
    /// The pixel lies outside the unified model's representable cone
    /// (only possible for xi > 1).
    #[error("pixel is outside the valid projection cone")]
    OutsideValidCone,
    /// The viewing ray does not intersect the plane at positive depth.
    #[error("ray does not intersect plane")]
    NoIntersection,
    /// SE(3) logarithm is not defined near a half-turn rotation.
    #[error("rotation angle too close to pi for a stable logarithm")]
    NearPiRotation,
}

pub type GeomResult<T> = Result<T, GeomError>;
