//! Deterministic synthetic world: textured geometry, trajectories, fisheye
//! rendering, LiDAR/gyro/GNSS simulation, fiducial detections and landmark
//! features. Every generator is a pure function of (inputs, seed).

mod fiducial;
mod landmarks;
mod noise;
mod render;
pub mod rigs;
mod scene;
mod sensors;
mod trajectory;

pub use fiducial::{simulate_target_detections, FiducialTarget, TargetDetection};
pub use landmarks::{
    sample_landmarks, simulate_features, Feature, FeatureNoise, Landmark, DESCRIPTOR_DIM,
};
pub use noise::fractal_noise;
pub use render::{
    raycast, Hit, ObjectSilhouette, RayGrid, RenderProfile, RenderedView, Renderer, SurfaceRef,
    SKY_INTENSITY,
};
pub use scene::{
    generate_scene, DynamicObject, ObjectClass, Quad, Scene, SceneConfig, TextureParams,
};
pub use sensors::{
    simulate_gnss_ins, simulate_imu, simulate_lidar, GyroSample, LidarPattern,
};
pub use trajectory::{generate_trajectory, Trajectory, TrajectoryKind};

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum WorldError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
