//! Dense-mapping loop: plane sweep -> dynamic masking -> TSDF fusion,
//! with optional per-frame raycasts.

use crate::geom::CameraRig;
use crate::img::{DepthImage, FloatImage};

use super::{
    build_plane_set, mask_dynamic, plane_sweep, raycast_volume, tsdf_integrate, BoundingBox2D,
    PerceptError, PerceptResult, SweepOptions, SweepView, TsdfVolume, TsdfVolumeConfig,
};

/// One time step of synchronized camera data.
pub struct DenseMappingFrame {
    pub time: f64,
    pub body_pose: crate::geom::RigidPose,
    /// (rig camera index, image); the first entry whose index equals
    /// `DenseMappingConfig::reference_camera` becomes the sweep reference.
    pub images: Vec<(usize, FloatImage)>,
    /// Detection boxes for the reference camera.
    pub boxes: Vec<BoundingBox2D>,
}

#[derive(Debug, Clone)]
pub struct DenseMappingConfig {
    pub reference_camera: usize,
    pub z_min: f64,
    pub z_max: f64,
    pub plane_count: usize,
    pub sweep: SweepOptions,
    pub volume: TsdfVolumeConfig,
    pub mask_dynamic_objects: bool,
    pub raycast_each_frame: bool,
}

pub struct DenseMappingOutput {
    pub volume: TsdfVolume,
    pub depth_per_frame: Vec<DepthImage>,
    pub raycast_per_frame: Vec<Option<DepthImage>>,
}

/// Runs the perception chain over the frames. Fails with the frame index
/// attached when a stage rejects its input.
pub fn run_dense_mapping(
    rig: &CameraRig,
    frames: &[DenseMappingFrame],
    config: &DenseMappingConfig,
) -> PerceptResult<DenseMappingOutput> {
    let planes = build_plane_set(config.z_min, config.z_max, config.plane_count)?;
    let mut volume = TsdfVolume::new(&config.volume);
    let mut depth_per_frame = Vec::with_capacity(frames.len());
    let mut raycast_per_frame = Vec::with_capacity(frames.len());

    for (fi, frame) in frames.iter().enumerate() {
        let stage = |e: PerceptError| PerceptError::Stage {
            frame: fi,
            source: Box::new(e),
        };
        let mut reference = None;
        let mut others = Vec::new();
        for (ci, image) in &frame.images {
            let view = SweepView {
                image: image.clone(),
                model: rig.camera(*ci).model,
                pose: rig.camera_pose_in_world(&frame.body_pose, *ci),
            };
            if *ci == config.reference_camera {
                reference = Some(view);
            } else {
                others.push(view);
            }
        }
        let reference = reference.ok_or_else(|| stage(PerceptError::NoViews))?;

        let depth = plane_sweep(&reference, &others, &planes, &config.sweep).map_err(stage)?;
        let depth = if config.mask_dynamic_objects {
            let boxes: Vec<BoundingBox2D> = frame
                .boxes
                .iter()
                .copied()
                .filter(|b| b.camera_index == config.reference_camera)
                .collect();
            mask_dynamic(&depth, &boxes)
        } else {
            depth
        };
        tsdf_integrate(
            &mut volume,
            &depth,
            &rig.camera(config.reference_camera).model,
            &reference.pose,
        );
        raycast_per_frame.push(if config.raycast_each_frame {
            Some(raycast_volume(
                &volume,
                &rig.camera(config.reference_camera).model,
                &reference.pose,
            ))
        } else {
            None
        });
        depth_per_frame.push(depth);
    }

    Ok(DenseMappingOutput {
        volume,
        depth_per_frame,
        raycast_per_frame,
    })
}
