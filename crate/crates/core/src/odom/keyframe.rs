//! Keyframes: per-camera image pyramids plus sparse high-gradient points
//! with inverse depths from plane-sweeping stereo.

use std::collections::HashMap;

use nalgebra::{Vector2, Vector3};

use crate::geom::{CameraRig, RigidPose};
use crate::img::FloatImage;
use crate::percept::{build_plane_set, plane_sweep_sparse, SweepOptions, SweepView};

use super::{OdomConfig, OdomError, OdomResult};

/// One tracked point, hosted by the keyframe camera it was sampled in.
/// `inv_depth` is the inverse range along the unit ray.
#[derive(Debug, Clone)]
pub struct SampledPoint {
    pub camera: usize,
    pub pixel: Vector2<f64>,
    pub ray: Vector3<f64>,
    pub inv_depth: f64,
    pub intensity: f32,
    pub gradient: f32,
}

pub struct Keyframe {
    pub timestamp: f64,
    /// Body-in-world pose estimate at creation; refined by the window.
    pub body_pose: RigidPose,
    /// Image pyramids per rig camera index.
    pub pyramids: HashMap<usize, Vec<FloatImage>>,
    pub points: Vec<SampledPoint>,
}

/// Picks the strongest-gradient pixel per cell bucket: up to
/// `points_per_cell` per `cell_size` x `cell_size` cell, gradient above the
/// threshold, window margin respected.
pub fn select_points(
    image: &FloatImage,
    gradient_threshold: f32,
    cell_size: u32,
    points_per_cell: usize,
) -> Vec<(u32, u32, f32)> {
    let margin = 4u32;
    let cells_x = image.width.div_ceil(cell_size);
    let cells_y = image.height.div_ceil(cell_size);
    let mut per_cell: Vec<Vec<(f32, u32, u32)>> =
        vec![Vec::new(); (cells_x * cells_y) as usize];
    for v in margin..image.height.saturating_sub(margin) {
        for u in margin..image.width.saturating_sub(margin) {
            let g = image.gradient_magnitude(u, v);
            if g < gradient_threshold {
                continue;
            }
            let cell = ((v / cell_size) * cells_x + (u / cell_size)) as usize;
            per_cell[cell].push((g, u, v));
        }
    }
    let mut out = Vec::new();
    for mut cell in per_cell {
        cell.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        for (g, u, v) in cell.into_iter().take(points_per_cell) {
            out.push((u, v, g));
        }
    }
    out
}

/// A virtual extra view for depth initialization: the same physical camera
/// at an earlier body pose.
pub struct VirtualView {
    pub camera: usize,
    pub image: FloatImage,
    pub body_pose: RigidPose,
}

/// Builds a keyframe at `body_pose` from the given per-camera images:
/// samples high-gradient points and initializes their inverse depths with
/// sparse plane-sweeping stereo against the stereo partner plus, when the
/// vehicle moved enough, the previous frame as a virtual view.
pub fn create_keyframe(
    rig: &CameraRig,
    config: &OdomConfig,
    timestamp: f64,
    body_pose: &RigidPose,
    images: &HashMap<usize, FloatImage>,
    virtual_views: &[VirtualView],
) -> OdomResult<Keyframe> {
    let planes = build_plane_set(config.z_min, config.z_max, config.sweep_planes)
        .expect("odometry depth range is valid");
    let sweep_opts = SweepOptions {
        window: 5,
        ..SweepOptions::default()
    };

    let mut pyramids = HashMap::new();
    let mut points = Vec::new();
    for (slot, &cam_idx) in config.cameras.iter().enumerate() {
        let Some(image) = images.get(&cam_idx) else {
            continue;
        };
        let partner = config.stereo_partner[slot];
        let baseline = (rig.camera(cam_idx).extrinsic.inverse().translation()
            - rig.camera(partner).extrinsic.inverse().translation())
        .norm();

        let mut others = Vec::new();
        if images.contains_key(&partner) && baseline >= config.min_baseline_m {
            others.push(SweepView {
                image: images[&partner].clone(),
                model: rig.camera(partner).model,
                pose: rig.camera_pose_in_world(body_pose, partner),
            });
        }
        for vv in virtual_views {
            if vv.camera == cam_idx {
                let motion = vv.body_pose.translation_distance_to(body_pose);
                if motion > config.virtual_view_min_motion_m {
                    others.push(SweepView {
                        image: vv.image.clone(),
                        model: rig.camera(cam_idx).model,
                        pose: rig.camera_pose_in_world(&vv.body_pose, cam_idx),
                    });
                }
            }
        }
        if others.is_empty() {
            return Err(OdomError::InsufficientBaseline);
        }

        let candidates = select_points(
            image,
            config.gradient_threshold,
            config.cell_size,
            config.points_per_cell,
        );
        let pixels: Vec<(u32, u32)> = candidates.iter().map(|&(u, v, _)| (u, v)).collect();
        let reference = SweepView {
            image: image.clone(),
            model: rig.camera(cam_idx).model,
            pose: rig.camera_pose_in_world(body_pose, cam_idx),
        };
        let depths = plane_sweep_sparse(&reference, &others, &planes, &pixels, &sweep_opts)
            .expect("others is nonempty");

        for (k, &(u, v, g)) in candidates.iter().enumerate() {
            let Some((z_depth, _cost)) = depths[k] else {
                continue;
            };
            let pixel = Vector2::new(f64::from(u), f64::from(v));
            let Ok(ray) = rig.camera(cam_idx).model.unproject(&pixel) else {
                continue;
            };
            // Plane-sweep depth is the camera-frame z; convert to inverse
            // range along the unit ray.
            let range = z_depth / ray[2];
            if !(range.is_finite() && range > 0.0) {
                continue;
            }
            points.push(SampledPoint {
                camera: cam_idx,
                pixel,
                ray,
                inv_depth: 1.0 / range,
                intensity: image.at(u, v),
                gradient: g,
            });
        }
        pyramids.insert(cam_idx, image.pyramid(config.pyramid_levels));
    }

    if points.len() < config.min_points {
        return Err(OdomError::InsufficientGradient {
            needed: config.min_points,
            got: points.len(),
        });
    }
    Ok(Keyframe {
        timestamp,
        body_pose: *body_pose,
        pyramids,
        points,
    })
}
