//! Direct multi-camera odometry: photometric frame tracking against the
//! most recent keyframe, plane-sweep depth initialization of sampled
//! points, a gyro orientation prior, and sliding-window refinement of
//! poses and inverse depths.

mod keyframe;
mod pipeline;
mod tracker;
mod window;

pub use keyframe::{create_keyframe, select_points, Keyframe, SampledPoint};
pub use pipeline::{run_odometry, should_create_keyframe, OdomFrame, OdomOutput};
pub use tracker::{track_frame, GyroPrior, TrackStats};
pub use window::{refine_window, SlidingWindow, WindowReport};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdomError {
    #[error("too few high-gradient points ({got} < {needed})")]
    InsufficientGradient { needed: usize, got: usize },
    #[error("tracking diverged: inlier fraction {0:.2} below threshold")]
    Diverged(f64),
    #[error("stereo baseline too small and no virtual view available")]
    InsufficientBaseline,
    #[error("frame {frame}: {source}")]
    Frame {
        frame: usize,
        #[source]
        source: Box<OdomError>,
    },
}

pub type OdomResult<T> = Result<T, OdomError>;

/// Odometry configuration. Intensities are normalized to [0, 1], so the
/// gradient and Huber thresholds are quoted against the 12-bit range.
#[derive(Debug, Clone)]
pub struct OdomConfig {
    /// Rig camera indices used for tracking (typically 4 stereo pairs).
    pub cameras: Vec<usize>,
    /// Stereo partner (for depth init) per entry of `cameras`.
    pub stereo_partner: Vec<usize>,
    pub window_size: usize,
    pub pyramid_levels: u32,
    pub gradient_threshold: f32,
    pub huber_intensity: f32,
    pub keyframe_translation_m: f64,
    pub keyframe_rotation_rad: f64,
    pub keyframe_inlier_fraction: f64,
    pub points_per_cell: usize,
    pub cell_size: u32,
    pub min_points: usize,
    pub sweep_planes: usize,
    pub z_min: f64,
    pub z_max: f64,
    pub min_baseline_m: f64,
    pub virtual_view_min_motion_m: f64,
    pub gyro_weight: f64,
    /// Per-frame gain/offset estimation for the night-analog profile.
    pub affine_brightness: bool,
}

impl OdomConfig {
    /// Defaults for the standard rig's four stereo pairs.
    pub fn for_rig(rig: &crate::geom::CameraRig) -> Self {
        let mut cameras = Vec::new();
        let mut stereo_partner = Vec::new();
        for (a, b) in crate::world::rigs::stereo_pair_labels() {
            if let (Some(ia), Some(ib)) = (rig.index_of(a), rig.index_of(b)) {
                cameras.push(ia);
                stereo_partner.push(ib);
                cameras.push(ib);
                stereo_partner.push(ia);
            }
        }
        Self {
            cameras,
            stereo_partner,
            window_size: 5,
            pyramid_levels: 3,
            gradient_threshold: 8.0 / 4095.0,
            huber_intensity: 12.0 / 4095.0,
            keyframe_translation_m: 0.5,
            keyframe_rotation_rad: 5f64.to_radians(),
            keyframe_inlier_fraction: 0.5,
            points_per_cell: 5,
            cell_size: 32,
            min_points: 200,
            sweep_planes: 32,
            z_min: 1.5,
            z_max: 60.0,
            min_baseline_m: 0.01,
            virtual_view_min_motion_m: 0.3,
            gyro_weight: 1e4,
            affine_brightness: false,
        }
    }

    /// Two-camera test configuration.
    pub fn for_stereo_test_rig() -> Self {
        Self {
            cameras: vec![0, 1],
            stereo_partner: vec![1, 0],
            window_size: 5,
            pyramid_levels: 3,
            gradient_threshold: 8.0 / 4095.0,
            huber_intensity: 12.0 / 4095.0,
            keyframe_translation_m: 0.5,
            keyframe_rotation_rad: 5f64.to_radians(),
            keyframe_inlier_fraction: 0.5,
            points_per_cell: 5,
            cell_size: 32,
            min_points: 200,
            sweep_planes: 32,
            z_min: 1.5,
            z_max: 60.0,
            min_baseline_m: 0.01,
            virtual_view_min_motion_m: 0.3,
            gyro_weight: 1e4,
            affine_brightness: false,
        }
    }
}
