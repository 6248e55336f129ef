//! Fiducial calibration target and simulated corner detections.

use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geom::{CameraRig, RigidPose};

use super::scene::{Quad, TextureParams};

/// Planar grid of square markers with uniquely identified corners.
/// Target frame: x along columns, y along rows, z out of the front face.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiducialTarget {
    pub rows: u32,
    pub cols: u32,
    /// Marker edge length, meters.
    pub tag_size: f64,
    /// Gap between markers, meters.
    pub spacing: f64,
    /// Target frame -> world.
    pub pose: RigidPose,
}

impl FiducialTarget {
    pub fn corner_count(&self) -> u32 {
        self.rows * self.cols * 4
    }

    /// Corner position in the target frame (z = 0 plane).
    pub fn corner_local(&self, id: u32) -> Vector3<f64> {
        assert!(id < self.corner_count(), "corner id out of range");
        let tag = id / 4;
        let k = id % 4;
        let row = f64::from(tag / self.cols);
        let col = f64::from(tag % self.cols);
        let pitch = self.tag_size + self.spacing;
        let x0 = col * pitch;
        let y0 = row * pitch;
        let (dx, dy) = match k {
            0 => (0.0, 0.0),
            1 => (self.tag_size, 0.0),
            2 => (self.tag_size, self.tag_size),
            _ => (0.0, self.tag_size),
        };
        Vector3::new(x0 + dx, y0 + dy, 0.0)
    }

    pub fn corner_world(&self, id: u32) -> Vector3<f64> {
        self.pose.transform_point(&self.corner_local(id))
    }

    /// Physical extent of the grid, meters.
    pub fn extent(&self) -> (f64, f64) {
        let pitch = self.tag_size + self.spacing;
        (
            f64::from(self.cols - 1) * pitch + self.tag_size,
            f64::from(self.rows - 1) * pitch + self.tag_size,
        )
    }

    /// The target board as a renderable quad (for LiDAR scans).
    pub fn board_quad(&self, texture_seed: u64) -> Quad {
        let (w, h) = self.extent();
        let margin = 0.1;
        let origin = self
            .pose
            .transform_point(&Vector3::new(-margin, -margin, 0.0));
        let eu = self.pose.transform_vector(&Vector3::new(w + 2.0 * margin, 0.0, 0.0));
        let ev = self.pose.transform_vector(&Vector3::new(0.0, h + 2.0 * margin, 0.0));
        Quad {
            origin,
            edge_u: eu,
            edge_v: ev,
            texture: TextureParams {
                seed: texture_seed,
                mean: 0.5,
                contrast: 0.9,
                base_scale: 2.0,
                octaves: 2,
            },
        }
    }
}

/// One simulated corner detection.
#[derive(Debug, Clone, Copy)]
pub struct TargetDetection {
    pub camera_index: usize,
    pub corner_id: u32,
    pub pixel: Vector2<f64>,
}

/// Projects every corner into every camera, keeping front-side visible
/// in-bounds corners, and adds isotropic Gaussian pixel noise.
pub fn simulate_target_detections(
    target: &FiducialTarget,
    rig: &CameraRig,
    body_pose: &RigidPose,
    noise_px: f64,
    seed: u64,
) -> Vec<TargetDetection> {
    assert!(noise_px >= 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise_px.max(1e-300)).unwrap();
    let mut out = Vec::new();
    for (ci, cam) in rig.cameras().iter().enumerate() {
        let cam_in_world = rig.camera_pose_in_world(body_pose, ci);
        // Front-side visibility: camera center must sit on the +z side of
        // the target plane.
        let cam_in_target = target.pose.inverse().compose(&cam_in_world);
        if cam_in_target.translation()[2] <= 0.05 {
            continue;
        }
        let world_to_cam = cam_in_world.inverse();
        for id in 0..target.corner_count() {
            let p_cam = world_to_cam.transform_point(&target.corner_world(id));
            let Ok(mut pixel) = cam.model.project(&p_cam) else {
                continue;
            };
            if !cam.model.in_bounds(&pixel) {
                continue;
            }
            if noise_px > 0.0 {
                pixel[0] += normal.sample(&mut rng);
                pixel[1] += normal.sample(&mut rng);
            }
            out.push(TargetDetection {
                camera_index: ci,
                corner_id: id,
                pixel,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{CameraModel, RigCamera};
    use nalgebra::UnitQuaternion;

    fn two_camera_rig() -> CameraRig {
        // Two forward-looking cameras 1.2 m apart (camera z = body x).
        let model = CameraModel::ideal(0.6, 90.0, 80.0, 80.0, 160, 160);
        let rot = UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(
            nalgebra::Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0),
        ));
        let make = |label: &str, y: f64| RigCamera {
            label: label.into(),
            model,
            extrinsic: RigidPose::new(rot, rot * -Vector3::new(0.0, y, 0.0)),
        };
        CameraRig::new(vec![make("left", 0.6), make("right", -0.6)])
    }

    fn facing_target(x: f64) -> FiducialTarget {
        // Board ahead of the rig at distance x, front (+z) toward -x world.
        let rot = UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(
            nalgebra::Matrix3::new(0.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0),
        ));
        FiducialTarget {
            rows: 4,
            cols: 5,
            tag_size: 0.16,
            spacing: 0.05,
            pose: RigidPose::new(rot, Vector3::new(x, 0.8, 1.5)),
        }
    }

    #[test]
    fn target_behind_cameras_yields_nothing() {
        let rig = two_camera_rig();
        let target = facing_target(-3.0);
        let det = simulate_target_detections(&target, &rig, &RigidPose::identity(), 0.0, 1);
        assert!(det.is_empty());
    }

    #[test]
    fn noiseless_detections_equal_exact_projections() {
        let rig = two_camera_rig();
        let target = facing_target(3.0);
        let det = simulate_target_detections(&target, &rig, &RigidPose::identity(), 0.0, 1);
        assert!(!det.is_empty());
        for d in &det {
            let cam_pose = rig.camera_pose_in_world(&RigidPose::identity(), d.camera_index);
            let p_cam = cam_pose
                .inverse()
                .transform_point(&target.corner_world(d.corner_id));
            let exact = rig.camera(d.camera_index).model.project(&p_cam).unwrap();
            assert!((exact - d.pixel).norm() < 1e-12);
        }
    }

    #[test]
    fn split_visibility_union_covers_visible_set() {
        // Target shifted sideways so the two cameras see different parts.
        let rig = two_camera_rig();
        let mut target = facing_target(1.2);
        target.pose = RigidPose::new(target.pose.rotation(), Vector3::new(1.2, 2.2, 1.5));
        let det = simulate_target_detections(&target, &rig, &RigidPose::identity(), 0.0, 1);
        let left: std::collections::BTreeSet<u32> = det
            .iter()
            .filter(|d| d.camera_index == 0)
            .map(|d| d.corner_id)
            .collect();
        let right: std::collections::BTreeSet<u32> = det
            .iter()
            .filter(|d| d.camera_index == 1)
            .map(|d| d.corner_id)
            .collect();
        assert!(!left.is_empty());
        // Analytic visible set: corners whose exact projection is in bounds.
        for ci in 0..2 {
            let cam_pose = rig.camera_pose_in_world(&RigidPose::identity(), ci);
            let expected: std::collections::BTreeSet<u32> = (0..target.corner_count())
                .filter(|&id| {
                    let p = cam_pose
                        .inverse()
                        .transform_point(&target.corner_world(id));
                    rig.camera(ci)
                        .model
                        .project(&p)
                        .map(|px| rig.camera(ci).model.in_bounds(&px))
                        .unwrap_or(false)
                })
                .collect();
            let got = if ci == 0 { &left } else { &right };
            assert_eq!(got, &expected, "camera {ci}");
        }
    }

    #[test]
    fn corner_ids_are_unique_positions() {
        let target = facing_target(2.0);
        let mut seen = std::collections::BTreeSet::new();
        for id in 0..target.corner_count() {
            let p = target.corner_local(id);
            let key = (
                (p[0] * 1e9).round() as i64,
                (p[1] * 1e9).round() as i64,
            );
            assert!(seen.insert(key), "duplicate corner {id}");
            assert_eq!(p[2], 0.0);
        }
    }
}
